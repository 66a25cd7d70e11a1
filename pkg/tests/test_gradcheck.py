import numpy as np
import pytest

from fusedseq.exceptions import NumericError
from fusedseq.gradcheck import finite_diff_grad, relative_error


def test_square_function():
    g = finite_diff_grad(lambda th: float(th[0] ** 2), np.array([3.0]), epsilon=1e-5)
    np.testing.assert_allclose(g, [6.0], atol=1e-8)


def test_constant_function_gives_zero_vector():
    g = finite_diff_grad(lambda th: 4.25, np.array([1.0, -2.0, 0.5]))
    assert g.tolist() == [0.0, 0.0, 0.0]


def test_multivariate_polynomial():
    def f(th):
        return float(th[0] * th[1] + 2.0 * th[1] ** 3)

    g = finite_diff_grad(f, np.array([2.0, -1.0]))
    np.testing.assert_allclose(g, [-1.0, 2.0 + 6.0], atol=1e-7)


def test_non_finite_evaluation_names_coordinate():
    def f(th):
        return float(np.log(th[1]))  # negative -> nan under the probe

    with pytest.raises(NumericError, match="coordinate 1"):
        finite_diff_grad(f, np.array([1.0, 1e-9]), epsilon=1e-5)


def test_epsilon_must_be_positive():
    with pytest.raises(ValueError):
        finite_diff_grad(lambda th: 0.0, np.array([1.0]), epsilon=0.0)


def test_relative_error_scales_by_max_norm():
    assert relative_error(np.array([1.0, 2.0]), np.array([1.0, 2.0])) == 0.0
    assert relative_error(np.array([11.0]), np.array([10.0])) == pytest.approx(0.1)
    # below-unity denominators clamp to 1
    assert relative_error(np.array([0.3]), np.array([0.1])) == pytest.approx(0.2)
