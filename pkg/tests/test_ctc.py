import itertools

import numpy as np
import pytest

from fusedseq.ctc import ctc_forward, extended_labels, min_alignment_length
from fusedseq.exceptions import InfeasibleError
from fusedseq.gradcheck import check_parameter_grads
from fusedseq.params import ParamStore
from fusedseq.tensor import Tensor, log_softmax

from oracles import ctc_nll_enumerate


def uniform_grid(t_len, n_sym):
    return Tensor(np.full((t_len, n_sym), -np.log(n_sym)))


def random_grid(t_len, n_sym, seed):
    rng = np.random.default_rng(seed)
    logits = rng.standard_normal((t_len, n_sym)) * 1.5
    return Tensor(logits - np.log(np.exp(logits).sum(axis=1, keepdims=True)))


def test_forced_alignment_has_zero_loss():
    # T=1, P(a)=1: only one path, probability one
    lp = Tensor(np.log(np.array([[1e-30, 1.0 - 1e-30]])))
    loss = ctc_forward(lp, [1], blank=0)
    assert loss.item() == pytest.approx(0.0, abs=1e-12)


def test_worked_uniform_example():
    # T=2, symbols {blank, a}, uniform halves; paths a., .a, aa -> P=3/4
    lp = uniform_grid(2, 2)
    loss = ctc_forward(lp, [1], blank=0)
    assert loss.item() == pytest.approx(-np.log(0.75), abs=1e-12)


def test_extended_labels_and_min_length():
    assert extended_labels([1, 2], 0) == [0, 1, 0, 2, 0]
    assert min_alignment_length([1, 2]) == 2
    assert min_alignment_length([1, 1]) == 3
    assert min_alignment_length([]) == 0


def test_infeasible_label_sequence_raises():
    lp = uniform_grid(2, 3)
    with pytest.raises(InfeasibleError):
        ctc_forward(lp, [1, 1], blank=0)  # needs >= 3 frames
    with pytest.raises(InfeasibleError):
        ctc_forward(lp, [1, 2, 1], blank=0)


def test_blank_in_labels_rejected():
    lp = uniform_grid(3, 3)
    with pytest.raises(ValueError):
        ctc_forward(lp, [0, 1], blank=0)


def test_exhaustive_grid_matches_enumeration():
    # every (T, V, labels) with T <= 6, V <= 3, |labels| <= 3
    checked = 0
    for n_sym in (2, 3, 4):  # includes blank column
        v = n_sym - 1
        for t_len in range(1, 7):
            lp = random_grid(t_len, n_sym, seed=10 * n_sym + t_len)
            for length in range(0, 4):
                for labels in itertools.product(range(1, v + 1), repeat=length):
                    labels = list(labels)
                    if min_alignment_length(labels) > t_len:
                        continue
                    got = ctc_forward(lp, labels, blank=0).item()
                    want = ctc_nll_enumerate(lp.data, labels, blank=0)
                    assert got == pytest.approx(want, abs=1e-10), (t_len, n_sym, labels)
                    checked += 1
    assert checked > 200


def test_empty_labels_equal_all_blank_path():
    lp = random_grid(4, 3, seed=5)
    got = ctc_forward(lp, [], blank=0).item()
    assert got == pytest.approx(-lp.data[:, 0].sum(), abs=1e-12)


def test_gradient_matches_finite_differences():
    rng = np.random.default_rng(3)
    store = ParamStore()
    logits = store.add("logits", rng.standard_normal((5, 4)))

    def loss():
        return ctc_forward(log_softmax(logits.value), [1, 2, 1], blank=0)

    errors = check_parameter_grads(loss, [logits])
    assert errors["logits"] < 1e-6


def test_loss_is_positive_for_uncertain_grids():
    lp = random_grid(6, 4, seed=8)
    assert ctc_forward(lp, [1, 3], blank=0).item() > 0.0
