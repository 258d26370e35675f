"""LSTM cell, vanilla RNN cell and bidirectional LSTM

Gates act on the concatenation ``[h_{t-1}, x_t]`` (hidden state first), which
fixes the column layout of every LSTM weight matrix: columns ``0..H-1`` read
the previous hidden state and columns ``H..H+X-1`` read the input.
"""
from dataclasses import dataclass, field
from typing import Dict, Optional

import numpy as np

from ecgbench.core.exceptions import ShapeError
from ecgbench.core.tensor import RngStream, Tensor, sigmoid, tanh
from ecgbench.models.layers import Layer, glorot_uniform, orthogonal

GATES = ("f", "i", "C", "o")


@dataclass
class LstmCell:
    """Parameters of one LSTM cell; each W_* is [H, H+X], each b_* is [H]"""

    W_f: np.ndarray
    W_i: np.ndarray
    W_C: np.ndarray
    W_o: np.ndarray
    b_f: np.ndarray
    b_i: np.ndarray
    b_C: np.ndarray
    b_o: np.ndarray

    def __post_init__(self):
        for gate in GATES:
            setattr(self, f"W_{gate}", np.asarray(getattr(self, f"W_{gate}"), dtype=np.float64))
            setattr(self, f"b_{gate}", np.asarray(getattr(self, f"b_{gate}"), dtype=np.float64))
        shape = self.W_f.shape
        if len(shape) != 2 or shape[1] <= shape[0]:
            raise ShapeError(f"LSTM weights must be [H, H+X] with X >= 1, got {shape}")
        for gate in GATES:
            if getattr(self, f"W_{gate}").shape != shape:
                raise ShapeError(f"W_{gate} shape differs from W_f {shape}")
            if getattr(self, f"b_{gate}").shape != (shape[0],):
                raise ShapeError(f"b_{gate} must have length {shape[0]}")

    @property
    def hidden_size(self) -> int:
        return self.W_f.shape[0]

    @property
    def input_size(self) -> int:
        return self.W_f.shape[1] - self.W_f.shape[0]

    @classmethod
    def zeros(cls, hidden_size: int, input_size: int) -> "LstmCell":
        w = np.zeros((hidden_size, hidden_size + input_size))
        b = np.zeros(hidden_size)
        return cls(w, w.copy(), w.copy(), w.copy(), b, b.copy(), b.copy(), b.copy())

    @classmethod
    def initialize(cls, hidden_size: int, input_size: int, rng: RngStream) -> "LstmCell":
        """Glorot-uniform weights over (H+X, H); forget-gate bias 1, other biases 0"""
        shape = (hidden_size, hidden_size + input_size)
        weights = [glorot_uniform(shape, shape[1], hidden_size, rng) for _ in GATES]
        biases = [np.ones(hidden_size) if g == "f" else np.zeros(hidden_size) for g in GATES]
        return cls(*weights, *biases)

    def stacked(self):
        """All four gates as one [4H, H+X] matrix and [4H] bias, gate order f, i, C, o"""
        weights = np.concatenate([self.W_f, self.W_i, self.W_C, self.W_o], axis=0)
        bias = np.concatenate([self.b_f, self.b_i, self.b_C, self.b_o])
        return weights, bias

    def parameters(self) -> Dict[str, np.ndarray]:
        params = {f"W_{g}": getattr(self, f"W_{g}") for g in GATES}
        params.update({f"b_{g}": getattr(self, f"b_{g}") for g in GATES})
        return params


@dataclass
class LstmGates:
    f: np.ndarray
    i: np.ndarray
    C_tilde: np.ndarray
    o: np.ndarray


@dataclass
class LstmState:
    h: np.ndarray
    C: np.ndarray
    gates: Optional[LstmGates] = field(default=None, compare=False)

    @classmethod
    def zeros(cls, hidden_size: int) -> "LstmState":
        return cls(np.zeros(hidden_size), np.zeros(hidden_size))


@dataclass
class RnnCell:
    """h_t = act(W_h h_{t-1} + U_x x_t + b_h); y_t = V h_t + b_y"""

    W_h: np.ndarray
    U_x: np.ndarray
    b_h: np.ndarray
    V: np.ndarray
    b_y: np.ndarray
    activation: str = "tanh"

    def __post_init__(self):
        for name in ("W_h", "U_x", "b_h", "V", "b_y"):
            setattr(self, name, np.asarray(getattr(self, name), dtype=np.float64))
        h = self.W_h.shape[0]
        if self.W_h.shape != (h, h):
            raise ShapeError(f"W_h must be square, got {self.W_h.shape}")
        if self.U_x.ndim != 2 or self.U_x.shape[0] != h:
            raise ShapeError(f"U_x must be [{h}, X], got {self.U_x.shape}")
        if self.b_h.shape != (h,):
            raise ShapeError(f"b_h must have length {h}")
        if self.V.ndim != 2 or self.V.shape[1] != h:
            raise ShapeError(f"V must be [Y, {h}], got {self.V.shape}")
        if self.b_y.shape != (self.V.shape[0],):
            raise ShapeError(f"b_y must have length {self.V.shape[0]}")
        if self.activation not in ("tanh", "relu"):
            raise ValueError(f"RNN activation must be tanh or relu, got {self.activation}")

    @property
    def hidden_size(self) -> int:
        return self.W_h.shape[0]

    @property
    def input_size(self) -> int:
        return self.U_x.shape[1]

    @property
    def output_size(self) -> int:
        return self.V.shape[0]

    @classmethod
    def initialize(cls, hidden_size: int, input_size: int, output_size: int, rng: RngStream,
                   activation: str = "tanh") -> "RnnCell":
        return cls(
            W_h=orthogonal(hidden_size, rng),
            U_x=glorot_uniform((hidden_size, input_size), input_size, hidden_size, rng),
            b_h=np.zeros(hidden_size),
            V=glorot_uniform((output_size, hidden_size), hidden_size, output_size, rng),
            b_y=np.zeros(output_size),
            activation=activation,
        )

    def parameters(self) -> Dict[str, np.ndarray]:
        return {"W_h": self.W_h, "U_x": self.U_x, "b_h": self.b_h, "V": self.V, "b_y": self.b_y}


@dataclass
class BiLstm:
    forward_cell: LstmCell
    backward_cell: LstmCell

    def __post_init__(self):
        if self.forward_cell.input_size != self.backward_cell.input_size:
            raise ShapeError("Forward and backward cells must share the input size")

    @property
    def output_size(self) -> int:
        return self.forward_cell.hidden_size + self.backward_cell.hidden_size


def _rnn_activate(z: np.ndarray, activation: str) -> np.ndarray:
    return tanh(z) if activation == "tanh" else np.maximum(z, 0.0)


# ---------------------------------------------------------------------------
# Single-sequence operations


def lstm_step(cell: LstmCell, state: LstmState, x_t: Tensor,
              forced_gates: Optional[Dict[str, np.ndarray]] = None) -> LstmState:
    """
    One LSTM time step.

    Args:
        cell: LSTM parameters
        state: previous (h, C)
        x_t: input vector [X]
        forced_gates: optional overrides for "f", "i" or "o" (test hook)

    Returns:
        New state with the gate activations attached
    """
    x_t = np.asarray(x_t, dtype=np.float64)
    H = cell.hidden_size
    if state.h.shape != (H,) or state.C.shape != (H,):
        raise ShapeError(f"State must have length {H}")
    if x_t.shape != (cell.input_size,):
        raise ShapeError(f"x_t must have length {cell.input_size}, got {x_t.shape}")
    hx = np.concatenate([state.h, x_t])
    f = sigmoid(cell.W_f @ hx + cell.b_f)
    i = sigmoid(cell.W_i @ hx + cell.b_i)
    C_tilde = tanh(cell.W_C @ hx + cell.b_C)
    o = sigmoid(cell.W_o @ hx + cell.b_o)
    if forced_gates:
        f = np.asarray(forced_gates.get("f", f), dtype=np.float64)
        i = np.asarray(forced_gates.get("i", i), dtype=np.float64)
        o = np.asarray(forced_gates.get("o", o), dtype=np.float64)
    C = f * state.C + i * C_tilde
    h = o * tanh(C)
    return LstmState(h=h, C=C, gates=LstmGates(f=f, i=i, C_tilde=C_tilde, o=o))


def lstm_sequence(cell: LstmCell, x_seq: Tensor, initial: Optional[LstmState] = None) -> Tensor:
    """Fold lstm_step over the rows of x_seq [T, X]; row t of the result is h_t"""
    x_seq = np.asarray(x_seq, dtype=np.float64)
    if x_seq.ndim != 2 or x_seq.shape[0] < 1:
        raise ShapeError(f"Sequence must be a non-empty [T, X] tensor, got {x_seq.shape}")
    state = initial or LstmState.zeros(cell.hidden_size)
    outputs = []
    for x_t in x_seq:
        state = lstm_step(cell, state, x_t)
        outputs.append(state.h)
    return np.stack(outputs)


def rnn_step(cell: RnnCell, h_prev: Tensor, x_t: Tensor) -> Tensor:
    h_prev = np.asarray(h_prev, dtype=np.float64)
    x_t = np.asarray(x_t, dtype=np.float64)
    if h_prev.shape != (cell.hidden_size,) or x_t.shape != (cell.input_size,):
        raise ShapeError(
            f"rnn_step expects h [{cell.hidden_size}] and x [{cell.input_size}], "
            f"got {h_prev.shape} and {x_t.shape}"
        )
    return _rnn_activate(cell.W_h @ h_prev + cell.U_x @ x_t + cell.b_h, cell.activation)


def rnn_output(cell: RnnCell, h_t: Tensor) -> Tensor:
    h_t = np.asarray(h_t, dtype=np.float64)
    if h_t.shape != (cell.hidden_size,):
        raise ShapeError(f"rnn_output expects h [{cell.hidden_size}], got {h_t.shape}")
    return cell.V @ h_t + cell.b_y


def bilstm_sequence(bi: BiLstm, x_seq: Tensor) -> Tensor:
    """Forward pass over t=1..T next to the time-aligned backward pass over t=T..1"""
    x_seq = np.asarray(x_seq, dtype=np.float64)
    if x_seq.ndim != 2 or x_seq.shape[0] < 1:
        raise ShapeError(f"Sequence must be a non-empty [T, X] tensor, got {x_seq.shape}")
    forward = lstm_sequence(bi.forward_cell, x_seq)
    backward = lstm_sequence(bi.backward_cell, x_seq[::-1])[::-1]
    return np.concatenate([forward, backward], axis=1)


# ---------------------------------------------------------------------------
# Batched layers with backpropagation through time


class LstmLayer(Layer):
    """LSTM over [N, T, X]; returns [N, T, H] or the last step [N, H]"""

    name = "lstm"

    def __init__(self, cell: LstmCell, return_sequences: bool = False):
        super().__init__()
        self.cell = cell
        self.return_sequences = return_sequences

    def parameters(self):
        return self.cell.parameters()

    def forward(self, x, training=False):
        if x.ndim != 3 or x.shape[2] != self.cell.input_size:
            raise ShapeError(f"lstm expects [N, T, {self.cell.input_size}], got {x.shape}")
        n, steps, _ = x.shape
        H = self.cell.hidden_size
        weights, bias = self.cell.stacked()
        h = np.zeros((n, H))
        c = np.zeros((n, H))
        outputs = np.empty((n, steps, H))
        cache = []
        for t in range(steps):
            hx = np.concatenate([h, x[:, t]], axis=1)
            z = hx @ weights.T + bias
            f = sigmoid(z[:, :H])
            i = sigmoid(z[:, H:2 * H])
            g = tanh(z[:, 2 * H:3 * H])
            o = sigmoid(z[:, 3 * H:])
            c_prev = c
            c = f * c_prev + i * g
            tanh_c = tanh(c)
            h = o * tanh_c
            outputs[:, t] = h
            cache.append((hx, f, i, g, o, c_prev, tanh_c))
        self._cache = (x.shape, weights, cache)
        return outputs if self.return_sequences else outputs[:, -1]

    def backward(self, grad):
        x_shape, weights, cache = self._cache
        n, steps, _ = x_shape
        H = self.cell.hidden_size
        if not self.return_sequences:
            full = np.zeros((n, steps, H))
            full[:, -1] = grad
            grad = full
        d_weights = np.zeros_like(weights)
        d_bias = np.zeros(weights.shape[0])
        dx = np.empty(x_shape)
        dh_next = np.zeros((n, H))
        dc_next = np.zeros((n, H))
        for t in reversed(range(steps)):
            hx, f, i, g, o, c_prev, tanh_c = cache[t]
            dh = grad[:, t] + dh_next
            do = dh * tanh_c
            dc = dh * o * (1.0 - tanh_c * tanh_c) + dc_next
            dz = np.concatenate([
                dc * c_prev * f * (1.0 - f),
                dc * g * i * (1.0 - i),
                dc * i * (1.0 - g * g),
                do * o * (1.0 - o),
            ], axis=1)
            d_weights += dz.T @ hx
            d_bias += dz.sum(axis=0)
            dhx = dz @ weights
            dh_next = dhx[:, :H]
            dx[:, t] = dhx[:, H:]
            dc_next = dc * f
        self.grads = {}
        for k, gate in enumerate(GATES):
            self.grads[f"W_{gate}"] = d_weights[k * H:(k + 1) * H]
            self.grads[f"b_{gate}"] = d_bias[k * H:(k + 1) * H]
        return dx


class BiLstmLayer(Layer):
    """Bidirectional LSTM; outputs [N, T, H_f+H_b] or the final states [N, H_f+H_b]"""

    name = "bilstm"

    def __init__(self, bi: BiLstm, return_sequences: bool = False):
        super().__init__()
        self.bi = bi
        self.return_sequences = return_sequences
        self._forward = LstmLayer(bi.forward_cell, return_sequences=True)
        self._backward = LstmLayer(bi.backward_cell, return_sequences=True)

    def parameters(self):
        params = {f"fwd.{k}": v for k, v in self._forward.parameters().items()}
        params.update({f"bwd.{k}": v for k, v in self._backward.parameters().items()})
        return params

    def forward(self, x, training=False):
        fwd = self._forward.forward(x, training)
        bwd = self._backward.forward(x[:, ::-1], training)[:, ::-1]
        if self.return_sequences:
            return np.concatenate([fwd, bwd], axis=2)
        # the backward direction finishes at t=1
        return np.concatenate([fwd[:, -1], bwd[:, 0]], axis=1)

    def backward(self, grad):
        H_f = self.bi.forward_cell.hidden_size
        steps = self._forward._cache[0][1]
        if self.return_sequences:
            g_fwd, g_bwd = grad[:, :, :H_f], grad[:, :, H_f:]
        else:
            n = grad.shape[0]
            g_fwd = np.zeros((n, steps, H_f))
            g_bwd = np.zeros((n, steps, grad.shape[1] - H_f))
            g_fwd[:, -1] = grad[:, :H_f]
            g_bwd[:, 0] = grad[:, H_f:]
        dx = self._forward.backward(g_fwd)
        dx = dx + self._backward.backward(np.ascontiguousarray(g_bwd[:, ::-1]))[:, ::-1]
        self.grads = {f"fwd.{k}": v for k, v in self._forward.grads.items()}
        self.grads.update({f"bwd.{k}": v for k, v in self._backward.grads.items()})
        return dx


class SimpleRnnLayer(Layer):
    """Vanilla RNN over [N, T, X] with the output head attached to the final step: [N, Y]"""

    name = "rnn"

    def __init__(self, cell: RnnCell):
        super().__init__()
        self.cell = cell

    def parameters(self):
        return self.cell.parameters()

    def forward(self, x, training=False):
        cell = self.cell
        if x.ndim != 3 or x.shape[2] != cell.input_size:
            raise ShapeError(f"rnn expects [N, T, {cell.input_size}], got {x.shape}")
        n, steps, _ = x.shape
        h = np.zeros((n, cell.hidden_size))
        states = [h]
        for t in range(steps):
            h = _rnn_activate(h @ cell.W_h.T + x[:, t] @ cell.U_x.T + cell.b_h, cell.activation)
            states.append(h)
        self._cache = (x, states)
        return h @ cell.V.T + cell.b_y

    def backward(self, grad):
        cell = self.cell
        x, states = self._cache
        steps = x.shape[1]
        grads = {name: np.zeros_like(p) for name, p in cell.parameters().items()}
        grads["V"] = grad.T @ states[-1]
        grads["b_y"] = grad.sum(axis=0)
        dx = np.empty(x.shape)
        dh = grad @ cell.V
        for t in reversed(range(steps)):
            h, h_prev = states[t + 1], states[t]
            if cell.activation == "tanh":
                dz = dh * (1.0 - h * h)
            else:
                dz = dh * (h > 0)
            grads["W_h"] += dz.T @ h_prev
            grads["U_x"] += dz.T @ x[:, t]
            grads["b_h"] += dz.sum(axis=0)
            dx[:, t] = dz @ cell.U_x
            dh = dz @ cell.W_h
        self.grads = grads
        return dx
