"""Unit tests for LSTM, vanilla RNN and bidirectional LSTM"""
import math

import numpy as np
import pytest

from ecgbench.core.exceptions import ShapeError
from ecgbench.core.tensor import RngStream, tensor
from ecgbench.models.recurrent import (
    BiLstm,
    BiLstmLayer,
    LstmCell,
    LstmLayer,
    LstmState,
    RnnCell,
    SimpleRnnLayer,
    bilstm_sequence,
    lstm_sequence,
    lstm_step,
    rnn_output,
    rnn_step,
)


def test_lstm_zero_cell_gates():
    """Test an all-zero cell opens every sigmoid gate halfway"""
    cell = LstmCell.zeros(2, 3)
    c_prev = tensor([0.8, -0.4])
    state = lstm_step(cell, LstmState(np.zeros(2), c_prev), tensor([1, 2, 3]))
    assert np.allclose(state.gates.f, 0.5)
    assert np.allclose(state.gates.i, 0.5)
    assert np.allclose(state.gates.o, 0.5)
    assert np.allclose(state.gates.C_tilde, 0.0)
    assert np.allclose(state.C, 0.5 * c_prev)
    assert np.allclose(state.h, 0.5 * np.tanh(0.5 * c_prev))


def test_lstm_forget_bias():
    """Test a forget bias of ln 3 gives a forget gate of 0.75"""
    cell = LstmCell.zeros(1, 1)
    cell.b_f = np.array([math.log(3.0)])
    state = lstm_step(cell, LstmState.zeros(1), tensor([0.0]))
    assert abs(state.gates.f[0] - 0.75) < 1e-12


def test_lstm_forced_gates_preserve_cell_state(rng):
    """Test f=1, i=0 carries the cell state unchanged across 1000 steps"""
    cell = LstmCell.initialize(2, 3, rng)
    c0 = tensor([0.7, -0.3])
    state = LstmState(np.zeros(2), c0)
    forced = {"f": np.ones(2), "i": np.zeros(2)}
    for _ in range(1000):
        state = lstm_step(cell, state, rng.standard_normal((3,)), forced_gates=forced)
    assert np.array_equal(state.C, c0)


def test_lstm_sequence_matches_manual_fold(rng):
    """Test the sequence output is the step-by-step fold of hidden states"""
    cell = LstmCell.initialize(3, 2, rng)
    x = rng.standard_normal((5, 2))
    out = lstm_sequence(cell, x)
    state = LstmState.zeros(3)
    for t in range(5):
        state = lstm_step(cell, state, x[t])
        assert np.allclose(out[t], state.h)


def test_lstm_single_step_sequence(rng):
    """Test T=1 gives exactly one step from the zero state"""
    cell = LstmCell.initialize(3, 2, rng)
    x = rng.standard_normal((1, 2))
    assert np.allclose(lstm_sequence(cell, x)[0], lstm_step(cell, LstmState.zeros(3), x[0]).h)


def test_lstm_is_order_sensitive(rng):
    """Test swapping time steps changes the final hidden state"""
    cell = LstmCell.initialize(3, 2, rng)
    x = rng.standard_normal((2, 2))
    assert not np.allclose(lstm_sequence(cell, x)[-1], lstm_sequence(cell, x[::-1])[-1])


def test_lstm_gate_and_output_bounds():
    """Test gates stay in their ranges and |h| < 1 on random cells"""
    rng = RngStream(21)
    for _ in range(50):
        cell = LstmCell.initialize(4, 3, rng)
        state = LstmState.zeros(4)
        for x_t in rng.standard_normal((6, 3)) * 5:
            state = lstm_step(cell, state, x_t)
            for gate in (state.gates.f, state.gates.i, state.gates.o):
                assert np.all((gate > 0) & (gate < 1))
            assert np.all(np.abs(state.gates.C_tilde) < 1)
            assert np.all(np.abs(state.h) < 1)


def test_saturated_lstm_stays_inside_open_ranges():
    """Test huge pre-activations never push gates to 0 or 1 or h to +-1"""
    cell = LstmCell.zeros(1, 1)
    for gate in ("f", "i", "C", "o"):
        getattr(cell, f"b_{gate}")[:] = 40.0
    state = lstm_step(cell, LstmState(np.zeros(1), tensor([30.0])), tensor([0.0]))
    for gate in (state.gates.f, state.gates.i, state.gates.o):
        assert np.all((gate > 0) & (gate < 1))
    assert np.all(np.abs(state.gates.C_tilde) < 1)
    assert np.all(np.abs(state.h) < 1)

    layer = LstmLayer(cell, return_sequences=True)
    out = layer.forward(np.full((2, 3, 1), 50.0))
    assert np.all(np.abs(out) < 1)


def test_saturated_rnn_step_stays_below_one():
    """Test a tanh RNN step with a huge pre-activation keeps |h| < 1"""
    cell = RnnCell(W_h=[[0.0]], U_x=[[100.0]], b_h=[0.0], V=[[1.0]], b_y=[0.0])
    h = rnn_step(cell, tensor([0.0]), tensor([-1.0]))
    assert -1.0 < h[0] < -0.999


def test_lstm_rejects_bad_shapes(rng):
    """Test input and weight shape checks"""
    cell = LstmCell.initialize(2, 3, rng)
    with pytest.raises(ShapeError):
        lstm_step(cell, LstmState.zeros(2), np.zeros(4))
    with pytest.raises(ShapeError):
        lstm_sequence(cell, np.zeros((0, 3)))
    with pytest.raises(ShapeError):
        LstmCell(np.zeros((2, 2)), np.zeros((2, 2)), np.zeros((2, 2)), np.zeros((2, 2)),
                 np.zeros(2), np.zeros(2), np.zeros(2), np.zeros(2))


def test_lstm_layer_matches_single_sequence(rng):
    """Test the batched layer agrees with lstm_sequence per sample"""
    cell = LstmCell.initialize(3, 2, rng)
    x = rng.standard_normal((4, 6, 2))
    layer = LstmLayer(cell, return_sequences=True)
    out = layer.forward(x)
    assert out.shape == (4, 6, 3)
    for n in range(4):
        assert np.allclose(out[n], lstm_sequence(cell, x[n]))
    assert np.allclose(LstmLayer(cell).forward(x), out[:, -1])


def test_rnn_step_value():
    """Test one tanh step with unit weights on a unit input"""
    cell = RnnCell(W_h=[[1.0]], U_x=[[1.0]], b_h=[0.0], V=[[1.0]], b_y=[0.0])
    h = rnn_step(cell, tensor([0.0]), tensor([1.0]))
    assert abs(h[0] - 0.76159) < 1e-5


def test_rnn_output_value():
    """Test the output head on a fixed hidden state"""
    cell = RnnCell(W_h=np.eye(2), U_x=np.zeros((2, 1)), b_h=np.zeros(2),
                   V=np.eye(2), b_y=tensor([1, 1]))
    assert rnn_output(cell, tensor([2, 3])).tolist() == [3.0, 4.0]


def test_rnn_relu_activation():
    """Test the relu variant clamps negative pre-activations"""
    cell = RnnCell(W_h=[[0.0]], U_x=[[1.0]], b_h=[0.0], V=[[1.0]], b_y=[0.0], activation="relu")
    assert rnn_step(cell, tensor([0.0]), tensor([-2.0])).tolist() == [0.0]
    with pytest.raises(ValueError):
        RnnCell(W_h=[[0.0]], U_x=[[1.0]], b_h=[0.0], V=[[1.0]], b_y=[0.0], activation="sigmoid")


def test_simple_rnn_layer_matches_steps(rng):
    """Test the layer output equals the head applied to the folded final state"""
    cell = RnnCell.initialize(4, 2, 3, rng)
    x = rng.standard_normal((2, 5, 2))
    out = SimpleRnnLayer(cell).forward(x)
    for n in range(2):
        h = np.zeros(4)
        for t in range(5):
            h = rnn_step(cell, h, x[n, t])
        assert np.allclose(out[n], rnn_output(cell, h))


def test_lstm_initialize_opens_forget_gate(rng):
    """Test fresh cells start with forget bias 1 and zero biases elsewhere"""
    cell = LstmCell.initialize(4, 3, rng)
    assert np.array_equal(cell.b_f, np.ones(4))
    for bias in (cell.b_i, cell.b_C, cell.b_o):
        assert np.array_equal(bias, np.zeros(4))
    state = lstm_step(cell, LstmState.zeros(4), np.zeros(3))
    assert np.allclose(state.gates.f, 1.0 / (1.0 + math.exp(-1.0)))


def test_rnn_initialize_orthogonal_recurrence(rng):
    """Test the recurrent matrix is orthogonal so the hidden norm survives a linear step"""
    cell = RnnCell.initialize(32, 8, 5, rng)
    assert np.allclose(cell.W_h @ cell.W_h.T, np.eye(32), atol=1e-10)
    h = rng.standard_normal((32,))
    assert math.isclose(np.linalg.norm(cell.W_h @ h), np.linalg.norm(h), rel_tol=1e-10)
    assert cell.U_x.shape == (32, 8)


def test_bilstm_palindrome_symmetry(rng):
    """Test identical cells on a palindromic sequence mirror each other"""
    cell = LstmCell.initialize(3, 2, rng)
    half = rng.standard_normal((3, 2))
    x = np.concatenate([half, half[::-1]])
    out = bilstm_sequence(BiLstm(cell, cell), x)
    T = x.shape[0]
    for t in range(T):
        assert np.allclose(out[t, 3:], out[T - 1 - t, :3])


def test_bilstm_two_steps_manual(rng):
    """Test T=2 against hand-wired forward and backward folds"""
    fwd = LstmCell.initialize(2, 1, rng)
    bwd = LstmCell.initialize(3, 1, rng)
    x = tensor([[0.5], [-1.0]])
    out = bilstm_sequence(BiLstm(fwd, bwd), x)
    assert out.shape == (2, 5)

    f1 = lstm_step(fwd, LstmState.zeros(2), x[0])
    f2 = lstm_step(fwd, f1, x[1])
    b2 = lstm_step(bwd, LstmState.zeros(3), x[1])
    b1 = lstm_step(bwd, b2, x[0])
    assert np.allclose(out[0], np.concatenate([f1.h, b1.h]))
    assert np.allclose(out[1], np.concatenate([f2.h, b2.h]))


def test_bilstm_layer_final_states(rng):
    """Test the non-sequence layer output pairs the last forward and first backward states"""
    bi = BiLstm(LstmCell.initialize(2, 3, rng), LstmCell.initialize(2, 3, rng))
    x = rng.standard_normal((2, 4, 3))
    out = BiLstmLayer(bi).forward(x)
    for n in range(2):
        seq = bilstm_sequence(bi, x[n])
        assert np.allclose(out[n], np.concatenate([seq[-1, :2], seq[0, 2:]]))


def test_bilstm_rejects_mismatched_inputs(rng):
    """Test the two directions must read the same input size"""
    with pytest.raises(ShapeError):
        BiLstm(LstmCell.initialize(2, 3, rng), LstmCell.initialize(2, 4, rng))
