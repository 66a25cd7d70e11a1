import numpy as np
import pytest

from fusedseq.fusion import (FusionKind, FusionParams, apply_fusion, ccf1_fuse,
                             ccf2_fuse, ccf3_fuse, cold_fuse, deep_fuse)
from fusedseq.params import ParamStore, uniform_init
from fusedseq.tensor import Tensor

from oracles import sigmoid

D = 2
V_LM = 3
D_LM = 2


def make_params(kind, seed=None, zero=False):
    store = ParamStore()
    if zero:
        init = lambda shape: np.zeros(shape)
    else:
        init = uniform_init(np.random.default_rng(seed if seed is not None else 0), 0.6)
    p = FusionParams(store, kind, D, V_LM, D_LM, init)
    return store, p


def rand_inputs(seed=4):
    rng = np.random.default_rng(seed)
    s = Tensor(rng.standard_normal(D) * 0.5)
    c = Tensor(rng.standard_normal(D))
    l_lm = Tensor(rng.standard_normal(V_LM))
    s_lm = Tensor(rng.standard_normal(D_LM) * 0.5)
    return s, c, l_lm, s_lm


# -- deep fusion ---------------------------------------------------------------


def test_deep_zero_connector_gives_half_gate():
    _, p = make_params(FusionKind.DEEP, zero=True)
    s, _, _, s_lm = rand_inputs()
    out = deep_fuse(s, s_lm, p, record=True)
    np.testing.assert_allclose(out.gate_trace["gate"].data, [0.5], atol=1e-15)
    np.testing.assert_allclose(out.inference_vec.data,
                               np.concatenate([s.data, 0.5 * s_lm.data]), atol=1e-15)


def test_deep_saturated_negative_bias_silences_lm():
    _, p = make_params(FusionKind.DEEP, zero=True)
    p.b.value.data = np.array([-30.0])
    s, _, _, s_lm = rand_inputs()
    out = deep_fuse(s, s_lm, p)
    np.testing.assert_allclose(out.inference_vec.data[D:], 0.0, atol=1e-12)
    np.testing.assert_array_equal(out.inference_vec.data[:D], s.data)


def test_deep_matches_hand_arithmetic():
    _, p = make_params(FusionKind.DEEP, seed=1)
    s, _, _, s_lm = rand_inputs()
    out = deep_fuse(s, s_lm, p)
    g = sigmoid(p.v.value.data @ s_lm.data + p.b.value.data[0])
    np.testing.assert_allclose(out.inference_vec.data,
                               np.concatenate([s.data, g * s_lm.data]), atol=1e-14)


def test_deep_carries_are_input_objects():
    _, p = make_params(FusionKind.DEEP, seed=1)
    s, c, l_lm, s_lm = rand_inputs()
    out = apply_fusion(p, s, c, l_lm, s_lm)
    assert out.carry_hidden is s
    assert out.carry_cell is c


# -- cold fusion ----------------------------------------------------------------


def test_cold_zero_projection_reduces_to_plain_state():
    _, p = make_params(FusionKind.COLD, seed=2)
    p.w1.value.data = np.zeros((D, V_LM))
    p.b1.value.data = np.zeros(D)
    s, c, l_lm, _ = rand_inputs()
    out = cold_fuse(s, l_lm, p)
    np.testing.assert_array_equal(out.inference_vec.data,
                                  np.concatenate([s.data, np.zeros(D)]))


def test_cold_gate_strictly_inside_unit_interval():
    _, p = make_params(FusionKind.COLD, seed=3)
    s, c, l_lm, _ = rand_inputs()
    out = cold_fuse(s, l_lm, p, record=True)
    g = out.gate_trace["gate"].data
    assert np.all(g > 0.0) and np.all(g < 1.0)


def test_cold_matches_hand_arithmetic():
    _, p = make_params(FusionKind.COLD, seed=5)
    s, c, l_lm, _ = rand_inputs()
    out = cold_fuse(s, l_lm, p, record=True)
    h = p.w1.value.data @ l_lm.data + p.b1.value.data  # no tanh
    g = sigmoid(p.w2.value.data @ np.concatenate([s.data, h]) + p.b2.value.data)
    np.testing.assert_allclose(out.inference_vec.data,
                               np.concatenate([s.data, g * h]), atol=1e-14)
    assert out.gate_trace["h_activation"] == "linear"
    assert out.carry_hidden is s


# -- cell control fusion 1 -------------------------------------------------------


def test_ccf1_zero_projection_keeps_cell_bitwise():
    _, p = make_params(FusionKind.CCF1, seed=6)
    p.w1.value.data = np.zeros((D, V_LM))
    p.b1.value.data = np.zeros(D)
    s, c, l_lm, _ = rand_inputs()
    out = ccf1_fuse(s, c, l_lm, p)
    assert out.carry_cell.data.tobytes() == c.data.tobytes()


def test_ccf1_inference_vec_is_hidden_state_object():
    _, p = make_params(FusionKind.CCF1, seed=7)
    s, c, l_lm, _ = rand_inputs()
    out = ccf1_fuse(s, c, l_lm, p)
    assert out.inference_vec is s
    assert out.carry_hidden is s


def test_ccf1_matches_hand_arithmetic():
    _, p = make_params(FusionKind.CCF1, seed=8)
    s, c, l_lm, _ = rand_inputs()
    out = ccf1_fuse(s, c, l_lm, p, record=True)
    h = np.tanh(p.w1.value.data @ l_lm.data + p.b1.value.data)
    g = sigmoid(p.w2.value.data @ np.concatenate([c.data, h]) + p.b2.value.data)
    np.testing.assert_allclose(out.carry_cell.data, c.data + g * h, atol=1e-14)
    assert out.gate_trace["h_activation"] == "tanh"


# -- cell control fusion 2 --------------------------------------------------------


def test_ccf2_zero_projection_reduces_everywhere():
    _, p = make_params(FusionKind.CCF2, seed=9)
    p.w1.value.data = np.zeros((D, V_LM))
    p.b1.value.data = np.zeros(D)
    s, c, l_lm, _ = rand_inputs()
    out = ccf2_fuse(s, c, l_lm, p)
    assert out.carry_cell.data.tobytes() == c.data.tobytes()
    np.testing.assert_array_equal(out.inference_vec.data,
                                  np.concatenate([s.data, np.zeros(D)]))


def test_ccf2_exposes_two_distinct_gates():
    _, p = make_params(FusionKind.CCF2, seed=10)
    s, c, l_lm, _ = rand_inputs()
    out = ccf2_fuse(s, c, l_lm, p, record=True)
    tr = out.gate_trace
    assert "gate_cell" in tr and "gate_state" in tr
    assert not np.array_equal(tr["gate_cell"].data, tr["gate_state"].data)


def test_ccf2_matches_hand_arithmetic():
    _, p = make_params(FusionKind.CCF2, seed=11)
    s, c, l_lm, _ = rand_inputs()
    out = ccf2_fuse(s, c, l_lm, p, record=True)
    h = p.w1.value.data @ l_lm.data + p.b1.value.data  # no tanh
    g_cell = sigmoid(p.w2.value.data @ np.concatenate([c.data, h]) + p.b2.value.data)
    g_state = sigmoid(p.w3.value.data @ np.concatenate([s.data, h]) + p.b3.value.data)
    np.testing.assert_allclose(out.carry_cell.data, c.data + g_cell * h, atol=1e-14)
    np.testing.assert_allclose(out.inference_vec.data,
                               np.concatenate([s.data, g_state * h]), atol=1e-14)
    assert out.gate_trace["h_activation"] == "linear"
    assert out.carry_hidden is s


# -- cell control fusion 3 ---------------------------------------------------------


def identity_slice():
    return np.concatenate([np.eye(D), np.zeros((D, D))], axis=1)


def test_ccf3_sum_identity_configuration_reduces():
    _, p = make_params(FusionKind.CCF3_SUM, seed=12)
    p.w1.value.data = np.zeros((D, V_LM))
    p.b1.value.data = np.zeros(D)
    p.w4.value.data = identity_slice()
    p.b4.value.data = np.zeros(D)
    s, c, l_lm, _ = rand_inputs()
    out = ccf3_fuse(s, c, l_lm, p, mode="sum")
    assert out.carry_cell.data.tobytes() == c.data.tobytes()
    assert out.carry_hidden.data.tobytes() == s.data.tobytes()


def test_ccf3_affine_identity_slice_keeps_cell():
    _, p = make_params(FusionKind.CCF3_AFFINE, seed=13)
    p.w1.value.data = np.zeros((D, V_LM))
    p.b1.value.data = np.zeros(D)
    p.w0.value.data = identity_slice()
    p.b0.value.data = np.zeros(D)
    s, c, l_lm, _ = rand_inputs()
    out = ccf3_fuse(s, c, l_lm, p, mode="affine")
    assert out.carry_cell.data.tobytes() == c.data.tobytes()


@pytest.mark.parametrize("mode", ["sum", "affine"])
def test_ccf3_matches_hand_arithmetic(mode):
    kind = FusionKind.CCF3_SUM if mode == "sum" else FusionKind.CCF3_AFFINE
    _, p = make_params(kind, seed=14)
    s, c, l_lm, _ = rand_inputs()
    out = ccf3_fuse(s, c, l_lm, p, mode=mode, record=True)
    h = np.tanh(p.w1.value.data @ l_lm.data + p.b1.value.data)
    g_state = sigmoid(p.w2.value.data @ np.concatenate([s.data, h]) + p.b2.value.data)
    g_cell = sigmoid(p.w3.value.data @ np.concatenate([c.data, h]) + p.b3.value.data)
    s_new = p.w4.value.data @ np.concatenate([s.data, g_state * h]) + p.b4.value.data
    if mode == "sum":
        c_new = c.data + g_cell * h
    else:
        c_new = p.w0.value.data @ np.concatenate([c.data, g_cell * h]) + p.b0.value.data
    np.testing.assert_allclose(out.carry_hidden.data, s_new, atol=1e-14)
    np.testing.assert_allclose(out.carry_cell.data, c_new, atol=1e-14)
    assert out.inference_vec is out.carry_hidden
    assert out.gate_trace["h_activation"] == "tanh"


def test_ccf3_rejects_unknown_mode():
    _, p = make_params(FusionKind.CCF3_SUM, seed=15)
    s, c, l_lm, _ = rand_inputs()
    with pytest.raises(ValueError):
        ccf3_fuse(s, c, l_lm, p, mode="mean")


# -- cross-variant contracts -----------------------------------------------------


ALL_FUSED = [FusionKind.DEEP, FusionKind.COLD, FusionKind.CCF1, FusionKind.CCF2,
             FusionKind.CCF3_SUM, FusionKind.CCF3_AFFINE]


@pytest.mark.parametrize("kind", ALL_FUSED)
def test_carry_contract(kind):
    _, p = make_params(kind, seed=20)
    s, c, l_lm, s_lm = rand_inputs()
    out = apply_fusion(p, s, c, l_lm, s_lm)
    if kind.rewrites_cell:
        assert out.carry_cell is not c
    else:
        assert out.carry_cell is c
    if kind.rewrites_hidden:
        assert out.carry_hidden is not s
    else:
        assert out.carry_hidden is s


@pytest.mark.parametrize("kind", ALL_FUSED)
@pytest.mark.parametrize("seed", [0, 1, 2, 3])
def test_gates_always_strictly_inside_unit_interval(kind, seed):
    _, p = make_params(kind, seed=seed)
    rng = np.random.default_rng(seed + 100)
    s = Tensor(rng.standard_normal(D) * 2)
    c = Tensor(rng.standard_normal(D) * 2)
    l_lm = Tensor(rng.standard_normal(V_LM) * 2)
    s_lm = Tensor(rng.standard_normal(D_LM) * 2)
    out = apply_fusion(p, s, c, l_lm, s_lm, record=True)
    for key, val in out.gate_trace.items():
        if key.startswith("gate"):
            assert np.all(val.data > 0.0) and np.all(val.data < 1.0)


def test_nonlinearity_audit():
    # tanh on the LM projection for ccf1/ccf3, linear for cold/ccf2;
    # relu before softmax for cold/ccf2/ccf3 but not ccf1/deep/none
    assert FusionKind.CCF1.lm_transform_activation == "tanh"
    assert FusionKind.CCF3_SUM.lm_transform_activation == "tanh"
    assert FusionKind.CCF3_AFFINE.lm_transform_activation == "tanh"
    assert FusionKind.COLD.lm_transform_activation == "linear"
    assert FusionKind.CCF2.lm_transform_activation == "linear"
    assert FusionKind.COLD.output_relu
    assert FusionKind.CCF2.output_relu
    assert FusionKind.CCF3_SUM.output_relu
    assert FusionKind.CCF3_AFFINE.output_relu
    assert not FusionKind.CCF1.output_relu
    assert not FusionKind.DEEP.output_relu
    assert not FusionKind.NONE.output_relu
    for kind, act in [(FusionKind.COLD, "linear"), (FusionKind.CCF1, "tanh"),
                      (FusionKind.CCF2, "linear"), (FusionKind.CCF3_SUM, "tanh"),
                      (FusionKind.CCF3_AFFINE, "tanh")]:
        _, p = make_params(kind, seed=30)
        s, c, l_lm, s_lm = rand_inputs()
        out = apply_fusion(p, s, c, l_lm, s_lm, record=True)
        assert out.gate_trace["h_activation"] == act


def test_fusion_kind_parsing():
    assert FusionKind.parse("ccf3-affine") is FusionKind.CCF3_AFFINE
    assert FusionKind.parse("NONE") is FusionKind.NONE
    from fusedseq.exceptions import ConfigError

    with pytest.raises(ConfigError):
        FusionKind.parse("warm")


def test_inference_dims():
    assert FusionKind.NONE.inference_dim(3, 5) == 3
    assert FusionKind.DEEP.inference_dim(3, 5) == 8
    assert FusionKind.COLD.inference_dim(3, 5) == 6
    assert FusionKind.CCF1.inference_dim(3, 5) == 3
    assert FusionKind.CCF2.inference_dim(3, 5) == 6
    assert FusionKind.CCF3_SUM.inference_dim(3, 5) == 3
    assert FusionKind.CCF3_AFFINE.inference_dim(3, 5) == 3
