import numpy as np
import pytest

from fusedseq.exceptions import ShapeError
from fusedseq.gradcheck import check_parameter_grads
from fusedseq.lstm import (BiLstmEncoder, EncoderConfig, LstmCellParams, LstmState,
                           bilstm_encode, lstm_cell_step, run_lstm)
from fusedseq.params import ParamStore, uniform_init
from fusedseq.tensor import Tensor, tsum

from oracles import lstm_step_reference


def zero_init(shape):
    return np.zeros(shape)


def make_cell(input_dim=2, state_dim=2, init=zero_init, forget_bias=0.0, name="cell"):
    store = ParamStore()
    p = LstmCellParams(store, name, input_dim, state_dim, init, forget_bias=forget_bias)
    return store, p


def test_zero_params_zero_state_gives_zero_state():
    _, p = make_cell()
    out = lstm_cell_step(Tensor([0.3, -0.4]), LstmState.zeros(2), p)
    assert out.hidden.to_list() == [0.0, 0.0]
    assert out.cell.to_list() == [0.0, 0.0]


def test_zero_params_halve_previous_cell():
    # all gates sigmoid(0)=0.5 and candidate tanh(0)=0: cell' = 0.5*cell
    _, p = make_cell()
    prev = LstmState(Tensor([0.0, 0.0]), Tensor([0.8, -0.2]))
    out = lstm_cell_step(Tensor([1.0, 1.0]), prev, p)
    np.testing.assert_allclose(out.cell.data, [0.4, -0.1], atol=1e-15)


def test_random_instance_matches_reference():
    rng = np.random.default_rng(42)
    store, p = make_cell(init=uniform_init(rng))
    x = rng.standard_normal(2)
    h0 = rng.standard_normal(2) * 0.5
    c0 = rng.standard_normal(2)
    out = lstm_cell_step(Tensor(x), LstmState(Tensor(h0), Tensor(c0)), p)
    h_ref, c_ref = lstm_step_reference(x, h0, c0, p.w.value.data, p.b.value.data)
    np.testing.assert_allclose(out.hidden.data, h_ref, atol=1e-14)
    np.testing.assert_allclose(out.cell.data, c_ref, atol=1e-14)


def test_hidden_stays_inside_unit_box():
    rng = np.random.default_rng(1)
    store, p = make_cell(init=uniform_init(rng, 2.0))
    state = LstmState.zeros(2)
    for _ in range(20):
        state = lstm_cell_step(Tensor(rng.standard_normal(2) * 3), state, p)
        assert np.all(np.abs(state.hidden.data) < 1.0)


def test_saturated_forget_gate_carries_cell_unchanged():
    # big forget bias, big negative input bias: cell' ~ cell exactly to 1e-9
    store, p = make_cell()
    b = p.b.value.data
    b[0:2] = -40.0   # input gate 0
    b[2:4] = 40.0    # forget gate 1
    prev = LstmState(Tensor([0.0, 0.0]), Tensor([0.37, -1.41]))
    out = lstm_cell_step(Tensor([0.0, 0.0]), prev, p)
    np.testing.assert_allclose(out.cell.data, prev.cell.data, atol=1e-9)


def test_dim_mismatch_raises_shape_error():
    _, p = make_cell()
    with pytest.raises(ShapeError):
        lstm_cell_step(Tensor([1.0, 2.0, 3.0]), LstmState.zeros(2), p)
    with pytest.raises(ShapeError):
        lstm_cell_step(Tensor([1.0, 2.0]), LstmState.zeros(3), p)


def test_gate_blocks_share_shape():
    _, p = make_cell(input_dim=3, state_dim=2)
    shapes = {p.gate_block(g).shape for g in ("input", "forget", "candidate", "output")}
    assert shapes == {(2, 5)}


def test_cell_step_gradients_match_finite_differences():
    rng = np.random.default_rng(9)
    store, p = make_cell(init=uniform_init(rng, 0.5))
    x = Tensor(rng.standard_normal(2))
    prev = LstmState(Tensor(rng.standard_normal(2) * 0.3), Tensor(rng.standard_normal(2)))
    weights = Tensor(rng.standard_normal(2))

    def loss():
        out = lstm_cell_step(x, prev, p)
        return tsum(out.hidden * weights) + tsum(out.cell * weights)

    errors = check_parameter_grads(loss, list(store))
    assert max(errors.values()) < 1e-4


def make_encoder(layers=1, units=2, proj=2, feat=2, seed=3):
    store = ParamStore()
    rng = np.random.default_rng(seed)
    enc = BiLstmEncoder(store, EncoderConfig(feat, layers, units, proj), uniform_init(rng))
    return store, enc


def test_encoder_zero_params_zero_output():
    store, enc = make_encoder()
    for p in store:
        p.value.data = np.zeros(p.shape)
    out = enc.encode([Tensor([0.5, -0.5])])
    assert len(out) == 1
    assert out[0].to_list() == [0.0, 0.0]


def test_encoder_rejects_empty_input():
    _, enc = make_encoder()
    with pytest.raises(ValueError):
        enc.encode([])


@pytest.mark.parametrize("t_len", [1, 2, 5, 9])
def test_encoder_output_length_equals_input_length(t_len):
    _, enc = make_encoder(layers=2)
    rng = np.random.default_rng(t_len)
    out = enc.encode([Tensor(rng.standard_normal(2)) for _ in range(t_len)])
    assert len(out) == t_len


def test_direction_symmetry_of_lstm_runs():
    # the backward stream over reversed input equals the mirrored forward stream
    rng = np.random.default_rng(5)
    store = ParamStore()
    p = LstmCellParams(store, "c", 2, 2, uniform_init(rng))
    frames = [Tensor(rng.standard_normal(2)) for _ in range(4)]
    fwd = run_lstm(frames, p)
    bwd_on_reversed = run_lstm(list(reversed(frames)), p, reverse=True)
    for f, b in zip(fwd, reversed(bwd_on_reversed)):
        np.testing.assert_array_equal(f.data, b.data)


def test_encoder_matches_manual_composition():
    store, enc = make_encoder(layers=1)
    rng = np.random.default_rng(11)
    frames = [Tensor(rng.standard_normal(2)) for _ in range(3)]
    got = enc.encode(frames)

    w = enc.cells_fwd[0].w.value.data
    b = enc.cells_fwd[0].b.value.data
    wr = enc.cells_bwd[0].w.value.data
    br = enc.cells_bwd[0].b.value.data
    h = np.zeros(2)
    c = np.zeros(2)
    fwd = []
    for f in frames:
        h, c = lstm_step_reference(f.data, h, c, w, b)
        fwd.append(h)
    h = np.zeros(2)
    c = np.zeros(2)
    bwd = [None] * 3
    for t in (2, 1, 0):
        h, c = lstm_step_reference(frames[t].data, h, c, wr, br)
        bwd[t] = h
    pw = enc.proj_w[0].value.data
    pb = enc.proj_b[0].value.data
    for t in range(3):
        expected = pw @ np.concatenate([fwd[t], bwd[t]]) + pb
        np.testing.assert_allclose(got[t].data, expected, atol=1e-13)


def test_two_layer_encoder_gradcheck():
    store, enc = make_encoder(layers=2, seed=8)
    rng = np.random.default_rng(2)
    frames = [Tensor(rng.standard_normal(2)) for _ in range(4)]
    weights = Tensor(rng.standard_normal(2))

    def loss():
        out = bilstm_encode(frames, enc)
        total = tsum(out[0] * weights)
        for h in out[1:]:
            total = total + tsum(h * weights)
        return total

    errors = check_parameter_grads(loss, list(store))
    assert max(errors.values()) < 1e-4
