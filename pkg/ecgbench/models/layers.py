"""Feedforward layers: convolution, max pooling, dense, dropout, flatten

Layers work on batches (leading axis N). Convolutions are cross-correlations
(no kernel flip). The ``*_forward`` functions at the bottom are the pure
single-sample entry points; they never touch a layer's training cache.
"""
from typing import Dict, Optional, Sequence, Tuple

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view
from scipy import special

from ecgbench.core.exceptions import ShapeError
from ecgbench.core.tensor import RngStream, Tensor, sigmoid, tanh

ACTIVATION_IDS = ("sigmoid", "relu", "tanh", "softmax", "none")


def activate(z: np.ndarray, activation: str) -> np.ndarray:
    if activation == "sigmoid":
        return sigmoid(z)
    if activation == "relu":
        return np.maximum(z, 0.0)
    if activation == "tanh":
        return tanh(z)
    if activation == "softmax":
        return special.softmax(z, axis=-1)
    if activation == "none":
        return z
    raise ValueError(f"Unknown activation: {activation}")


def activation_backward(grad: np.ndarray, z: np.ndarray, y: np.ndarray, activation: str) -> np.ndarray:
    """Gradient wrt pre-activation ``z`` given output ``y`` and upstream ``grad``"""
    if activation == "sigmoid":
        return grad * y * (1.0 - y)
    if activation == "relu":
        return grad * (z > 0)
    if activation == "tanh":
        return grad * (1.0 - y * y)
    if activation == "softmax":
        return y * (grad - np.sum(grad * y, axis=-1, keepdims=True))
    return grad


def glorot_uniform(shape: Sequence[int], fan_in: int, fan_out: int, rng: RngStream) -> np.ndarray:
    limit = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(shape, -limit, limit)


def orthogonal(size: int, rng: RngStream) -> np.ndarray:
    """Random [size, size] orthogonal matrix from the QR factors of a Gaussian draw"""
    q, r = np.linalg.qr(rng.standard_normal((size, size)))
    return q * np.sign(np.diag(r))



class Layer:
    """Base class: batched forward/backward with an optional parameter set"""

    name = "layer"
    trainable = True

    def __init__(self):
        self.grads: Dict[str, np.ndarray] = {}
        self._cache = None

    def parameters(self) -> Dict[str, np.ndarray]:
        return {}

    def forward(self, x: np.ndarray, training: bool = False) -> np.ndarray:
        raise NotImplementedError

    def backward(self, grad: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def __repr__(self):
        return f"<{type(self).__name__}>"


# ---------------------------------------------------------------------------
# Convolution


def _pad_amounts(size: int, kernel: int, stride: int, padding: str) -> Tuple[int, int]:
    if padding == "valid":
        return 0, 0
    if padding == "same":
        out = -(-size // stride)
        total = max((out - 1) * stride + kernel - size, 0)
        # odd deficits put the extra zero on the left/top
        return total - total // 2, total // 2
    raise ValueError(f"Unknown padding mode: {padding}")


def _conv_windows(x: np.ndarray, kh: int, kw: int, stride: int, padding: str):
    """Pad ``x`` [N,C,H,W] and return (padded, windows [N,C,H',W',kh,kw], pads)"""
    _, _, h, w = x.shape
    top, bottom = _pad_amounts(h, kh, stride, padding)
    left, right = _pad_amounts(w, kw, stride, padding)
    padded = np.pad(x, ((0, 0), (0, 0), (top, bottom), (left, right)))
    if kh > padded.shape[2] or kw > padded.shape[3]:
        raise ShapeError(
            f"Kernel {kh}x{kw} larger than padded input {padded.shape[2]}x{padded.shape[3]}"
        )
    windows = sliding_window_view(padded, (kh, kw), axis=(2, 3))[:, :, ::stride, ::stride]
    return padded, windows, (top, left)


class Conv2DLayer(Layer):
    """F square D x D filters over C_in channels (weights [F, C_in, D, D])"""

    name = "conv2d"

    def __init__(self, weights: np.ndarray, bias: np.ndarray, stride: int = 1, padding_mode: str = "valid"):
        super().__init__()
        weights = np.asarray(weights, dtype=np.float64)
        bias = np.asarray(bias, dtype=np.float64)
        self._check_weights(weights)
        if bias.shape != (weights.shape[0],):
            raise ShapeError(f"Bias length {bias.shape} does not match F={weights.shape[0]}")
        if stride < 1:
            raise ValueError(f"Stride must be >= 1, got {stride}")
        if padding_mode not in ("valid", "same"):
            raise ValueError(f"Unknown padding mode: {padding_mode}")
        self.weights = weights
        self.bias = bias
        self.stride = int(stride)
        self.padding_mode = padding_mode

    @staticmethod
    def _check_weights(weights: np.ndarray) -> None:
        if weights.ndim != 4 or weights.shape[2] != weights.shape[3]:
            raise ShapeError(f"Conv2D weights must be [F, C_in, D, D], got {weights.shape}")

    @classmethod
    def initialize(cls, num_filters: int, in_channels: int, kernel_size: int, rng: RngStream,
                   stride: int = 1, padding_mode: str = "valid"):
        shape = (num_filters, in_channels, kernel_size, kernel_size)
        fan_in = in_channels * kernel_size * kernel_size
        weights = glorot_uniform(shape, fan_in, num_filters * kernel_size * kernel_size, rng)
        return cls(weights, np.zeros(num_filters), stride, padding_mode)

    @property
    def num_filters(self) -> int:
        return self.weights.shape[0]

    @property
    def in_channels(self) -> int:
        return self.weights.shape[1]

    @property
    def kernel_shape(self) -> Tuple[int, int]:
        return self.weights.shape[2], self.weights.shape[3]

    def parameters(self):
        return {"weights": self.weights, "bias": self.bias}

    def _as_4d(self, x: np.ndarray) -> np.ndarray:
        if x.ndim != 4 or x.shape[1] != self.in_channels:
            raise ShapeError(f"{self.name} expects [N, {self.in_channels}, H, W], got {x.shape}")
        return x

    def _from_4d(self, y: np.ndarray) -> np.ndarray:
        return y

    def _kernel_4d(self) -> np.ndarray:
        return self.weights

    def forward(self, x, training=False):
        x4 = self._as_4d(x)
        kernel = self._kernel_4d()
        kh, kw = kernel.shape[2:]
        padded, windows, pads = _conv_windows(x4, kh, kw, self.stride, self.padding_mode)
        out = np.einsum("nchwij,fcij->nfhw", windows, kernel, optimize=True)
        out += self.bias[None, :, None, None]
        self._cache = (x4.shape, padded.shape, windows, pads)
        return self._from_4d(out)

    def backward(self, grad):
        x_shape, padded_shape, windows, (top, left) = self._cache
        g = grad.reshape(grad.shape[0], grad.shape[1], -1, grad.shape[-1])
        kernel = self._kernel_4d()
        kh, kw = kernel.shape[2:]
        out_h, out_w = g.shape[2], g.shape[3]
        d_kernel = np.einsum("nchwij,nfhw->fcij", windows, g, optimize=True)
        self.grads = {"weights": d_kernel.reshape(self.weights.shape), "bias": g.sum(axis=(0, 2, 3))}
        d_padded = np.zeros(padded_shape)
        s = self.stride
        for i in range(kh):
            for j in range(kw):
                d_padded[:, :, i:i + s * out_h:s, j:j + s * out_w:s] += np.einsum(
                    "nfhw,fc->nchw", g, kernel[:, :, i, j], optimize=True
                )
        dx = d_padded[:, :, top:top + x_shape[2], left:left + x_shape[3]]
        return dx.reshape(self._input_shape_for(grad, x_shape))

    def _input_shape_for(self, grad, x_shape):
        return x_shape


class Conv1DLayer(Conv2DLayer):
    """F filters of width D over C_in channels (weights [F, C_in, D]); input [N, C_in, L]"""

    name = "conv1d"

    @staticmethod
    def _check_weights(weights: np.ndarray) -> None:
        if weights.ndim != 3:
            raise ShapeError(f"Conv1D weights must be [F, C_in, D], got {weights.shape}")

    @classmethod
    def initialize(cls, num_filters: int, in_channels: int, kernel_size: int, rng: RngStream,
                   stride: int = 1, padding_mode: str = "valid"):
        shape = (num_filters, in_channels, kernel_size)
        weights = glorot_uniform(shape, in_channels * kernel_size, num_filters * kernel_size, rng)
        return cls(weights, np.zeros(num_filters), stride, padding_mode)

    @property
    def kernel_shape(self) -> Tuple[int, int]:
        return 1, self.weights.shape[2]

    def _as_4d(self, x):
        if x.ndim != 3 or x.shape[1] != self.in_channels:
            raise ShapeError(f"conv1d expects [N, {self.in_channels}, L], got {x.shape}")
        return x[:, :, None, :]

    def _from_4d(self, y):
        return y[:, :, 0, :]

    def _kernel_4d(self):
        return self.weights[:, :, None, :]

    def _input_shape_for(self, grad, x_shape):
        return (x_shape[0], x_shape[1], x_shape[3])


# ---------------------------------------------------------------------------
# Pooling


class MaxPool2DLayer(Layer):
    """Max over P x P windows stepped by s (s defaults to P)"""

    name = "maxpool2d"
    trainable = False

    def __init__(self, window: int, stride: Optional[int] = None):
        super().__init__()
        stride = window if stride is None else stride
        if window < 1 or stride < 1:
            raise ValueError(f"Pool window and stride must be >= 1, got P={window}, s={stride}")
        self.window = int(window)
        self.stride = int(stride)

    @property
    def window_shape(self) -> Tuple[int, int]:
        return self.window, self.window

    def _as_4d(self, x):
        if x.ndim != 4:
            raise ShapeError(f"maxpool2d expects [N, C, H, W], got {x.shape}")
        return x

    def _from_4d(self, y):
        return y

    def forward(self, x, training=False):
        x4 = self._as_4d(x)
        ph, pw = self.window_shape
        if ph > x4.shape[2] or pw > x4.shape[3]:
            raise ShapeError(f"Pool window {ph}x{pw} exceeds input {x4.shape[2]}x{x4.shape[3]}")
        windows = sliding_window_view(x4, (ph, pw), axis=(2, 3))[:, :, ::self.stride, ::self.stride]
        flat = windows.reshape(windows.shape[:4] + (ph * pw,))
        self._cache = (x.shape, x4.shape, np.argmax(flat, axis=-1))
        return self._from_4d(flat.max(axis=-1))

    def backward(self, grad):
        x_shape, x4_shape, arg = self._cache
        g = grad.reshape(arg.shape)
        ph, pw = self.window_shape
        s = self.stride
        out_h, out_w = arg.shape[2], arg.shape[3]
        dx = np.zeros(x4_shape)
        for i in range(ph):
            for j in range(pw):
                mask = arg == i * pw + j
                dx[:, :, i:i + s * out_h:s, j:j + s * out_w:s] += g * mask
        return dx.reshape(x_shape)


class MaxPool1DLayer(MaxPool2DLayer):
    """Max over width-P windows of [N, C, L] stepped by s"""

    name = "maxpool1d"

    @property
    def window_shape(self):
        return 1, self.window

    def _as_4d(self, x):
        if x.ndim != 3:
            raise ShapeError(f"maxpool1d expects [N, C, L], got {x.shape}")
        return x[:, :, None, :]

    def _from_4d(self, y):
        return y[:, :, 0, :]


# ---------------------------------------------------------------------------
# Dense and friends


class DenseLayer(Layer):
    """y = activation(W x + b) with W [out, in]"""

    name = "dense"

    def __init__(self, weights: np.ndarray, bias: np.ndarray, activation: str = "none"):
        super().__init__()
        weights = np.asarray(weights, dtype=np.float64)
        bias = np.asarray(bias, dtype=np.float64)
        if weights.ndim != 2 or bias.shape != (weights.shape[0],):
            raise ShapeError(f"Dense weights {weights.shape} and bias {bias.shape} disagree")
        if not np.all(np.isfinite(weights)):
            raise ValueError("Dense weights must be finite")
        if activation not in ACTIVATION_IDS:
            raise ValueError(f"Unknown activation: {activation}")
        self.weights = weights
        self.bias = bias
        self.activation = activation

    @classmethod
    def initialize(cls, in_features: int, out_features: int, rng: RngStream, activation: str = "none"):
        weights = glorot_uniform((out_features, in_features), in_features, out_features, rng)
        return cls(weights, np.zeros(out_features), activation)

    @property
    def in_features(self) -> int:
        return self.weights.shape[1]

    @property
    def out_features(self) -> int:
        return self.weights.shape[0]

    def parameters(self):
        return {"weights": self.weights, "bias": self.bias}

    def forward(self, x, training=False):
        if x.ndim != 2 or x.shape[1] != self.in_features:
            raise ShapeError(f"dense expects [N, {self.in_features}], got {x.shape}")
        z = x @ self.weights.T + self.bias
        y = activate(z, self.activation)
        self._cache = (x, z, y)
        return y

    def backward(self, grad):
        x, z, y = self._cache
        dz = activation_backward(grad, z, y, self.activation)
        self.grads = {"weights": dz.T @ x, "bias": dz.sum(axis=0)}
        return dz @ self.weights


class ActivationLayer(Layer):
    name = "activation"
    trainable = False

    def __init__(self, activation: str):
        super().__init__()
        if activation not in ACTIVATION_IDS:
            raise ValueError(f"Unknown activation: {activation}")
        self.activation = activation

    def forward(self, x, training=False):
        y = activate(x, self.activation)
        self._cache = (x, y)
        return y

    def backward(self, grad):
        x, y = self._cache
        return activation_backward(grad, x, y, self.activation)


class DropoutLayer(Layer):
    """Inverted dropout: survivors are scaled by 1/(1-p) during training"""

    name = "dropout"
    trainable = False

    def __init__(self, rate: float, rng: Optional[RngStream] = None):
        super().__init__()
        if not 0.0 <= rate < 1.0:
            raise ValueError(f"Dropout rate must be in [0, 1), got {rate}")
        self.rate = float(rate)
        self.rng = rng

    def forward(self, x, training=False):
        if not training or self.rate == 0.0:
            self._cache = None
            return x
        if self.rng is None:
            raise ValueError("Dropout in training mode needs an RngStream")
        mask = _dropout_mask(x.shape, self.rate, self.rng)
        self._cache = mask
        return x * mask

    def backward(self, grad):
        return grad if self._cache is None else grad * self._cache


def _dropout_mask(shape, rate: float, rng: RngStream) -> np.ndarray:
    keep = rng.uniform(shape) >= rate
    return keep / (1.0 - rate)


class FlattenLayer(Layer):
    name = "flatten"
    trainable = False

    def forward(self, x, training=False):
        self._cache = x.shape
        return x.reshape(x.shape[0], -1)

    def backward(self, grad):
        return grad.reshape(self._cache)


class ReshapeLayer(Layer):
    """Reshape every sample to ``target_shape`` (batch axis untouched)"""

    name = "reshape"
    trainable = False

    def __init__(self, target_shape: Sequence[int]):
        super().__init__()
        self.target_shape = tuple(int(d) for d in target_shape)

    def forward(self, x, training=False):
        if int(np.prod(x.shape[1:])) != int(np.prod(self.target_shape)):
            raise ShapeError(f"Cannot reshape {x.shape[1:]} to {self.target_shape}")
        self._cache = x.shape
        return x.reshape((x.shape[0],) + self.target_shape)

    def backward(self, grad):
        return grad.reshape(self._cache)


# ---------------------------------------------------------------------------
# Single-sample operations


def conv2d_forward(layer: Conv2DLayer, input: Tensor) -> Tensor:
    """Convolve one [C_in, H, W] map; returns [F, H', W']"""
    if input.ndim != 3:
        raise ShapeError(f"conv2d_forward expects [C_in, H, W], got {input.shape}")
    x = input[None].astype(np.float64)
    kh, kw = layer.kernel_shape
    _, windows, _ = _conv_windows(layer._as_4d(x), kh, kw, layer.stride, layer.padding_mode)
    out = np.einsum("nchwij,fcij->nfhw", windows, layer._kernel_4d(), optimize=True)
    return out[0] + layer.bias[:, None, None]


def conv1d_forward(layer: Conv1DLayer, input: Tensor) -> Tensor:
    """Convolve one [C_in, L] sequence; returns [F, L']"""
    if input.ndim != 2:
        raise ShapeError(f"conv1d_forward expects [C_in, L], got {input.shape}")
    x = layer._as_4d(input[None].astype(np.float64))
    kh, kw = layer.kernel_shape
    _, windows, _ = _conv_windows(x, kh, kw, layer.stride, layer.padding_mode)
    out = np.einsum("nchwij,fcij->nfhw", windows, layer._kernel_4d(), optimize=True)
    return out[0, :, 0, :] + layer.bias[:, None]


def maxpool_forward(layer: MaxPool2DLayer, input: Tensor) -> Tensor:
    """Pool one [C, H, W] (2-D layer) or [C, L] (1-D layer) map; a bare [H, W] is treated as one channel"""
    x = np.asarray(input, dtype=np.float64)
    squeeze = False
    if isinstance(layer, MaxPool1DLayer) and x.ndim == 1:
        x, squeeze = x[None], True
    elif not isinstance(layer, MaxPool1DLayer) and x.ndim == 2:
        x, squeeze = x[None], True
    x4 = layer._as_4d(x[None])
    ph, pw = layer.window_shape
    if ph > x4.shape[2] or pw > x4.shape[3]:
        raise ShapeError(f"Pool window {ph}x{pw} exceeds input {x4.shape[2]}x{x4.shape[3]}")
    windows = sliding_window_view(x4, (ph, pw), axis=(2, 3))[:, :, ::layer.stride, ::layer.stride]
    out = layer._from_4d(windows.max(axis=(-2, -1)))[0]
    return out[0] if squeeze else out


def dense_forward(layer: DenseLayer, x: Tensor) -> Tensor:
    x = np.asarray(x, dtype=np.float64)
    if x.shape != (layer.in_features,):
        raise ShapeError(f"dense_forward expects [{layer.in_features}], got {x.shape}")
    return activate(layer.weights @ x + layer.bias, layer.activation)


def dropout_forward(layer: DropoutLayer, x: Tensor, training: bool, rng: RngStream) -> Tensor:
    if not training or layer.rate == 0.0:
        return np.array(x, dtype=np.float64)
    return x * _dropout_mask(x.shape, layer.rate, rng)
