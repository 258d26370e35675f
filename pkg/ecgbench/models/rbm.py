"""Restricted Boltzmann machines and deep belief networks

Energy of a joint binary configuration:

    E(v, h) = -sum_ij w_ij v_i h_j - sum_i a_i v_i - sum_j b_j h_j

and P(v, h) = exp(-E(v, h)) / Z. Exhaustive quantities (Z, joint
probabilities) are limited to n_visible + n_hidden <= 20 units.
"""
import itertools
from dataclasses import dataclass
from typing import List, Optional

import numpy as np
from scipy import special

from ecgbench.core.exceptions import EnumerationLimitError, ShapeError
from ecgbench.core.tensor import RngStream, Tensor
from ecgbench.models.layers import DenseLayer, Layer, glorot_uniform
from ecgbench.utils.logger import logger

MAX_ENUMERATION_UNITS = 20


@dataclass
class Rbm:
    """W [n_visible, n_hidden], visible bias a [n_visible], hidden bias b [n_hidden]"""

    W: np.ndarray
    a: np.ndarray
    b: np.ndarray

    def __post_init__(self):
        self.W = np.asarray(self.W, dtype=np.float64)
        self.a = np.asarray(self.a, dtype=np.float64)
        self.b = np.asarray(self.b, dtype=np.float64)
        if self.W.ndim != 2:
            raise ShapeError(f"RBM weights must be [n_visible, n_hidden], got {self.W.shape}")
        if self.a.shape != (self.W.shape[0],) or self.b.shape != (self.W.shape[1],):
            raise ShapeError(
                f"Bias shapes {self.a.shape}/{self.b.shape} do not match W {self.W.shape}"
            )
        if not (np.all(np.isfinite(self.W)) and np.all(np.isfinite(self.a)) and np.all(np.isfinite(self.b))):
            raise ValueError("RBM parameters must be finite")

    @property
    def n_visible(self) -> int:
        return self.W.shape[0]

    @property
    def n_hidden(self) -> int:
        return self.W.shape[1]

    @classmethod
    def zeros(cls, n_visible: int, n_hidden: int) -> "Rbm":
        return cls(np.zeros((n_visible, n_hidden)), np.zeros(n_visible), np.zeros(n_hidden))

    @classmethod
    def initialize(cls, n_visible: int, n_hidden: int, rng: RngStream) -> "Rbm":
        W = glorot_uniform((n_visible, n_hidden), n_visible, n_hidden, rng)
        return cls(W, np.zeros(n_visible), np.zeros(n_hidden))


@dataclass
class RbmDelta:
    """Parameter changes applied by one contrastive-divergence update"""

    dW: np.ndarray
    da: np.ndarray
    db: np.ndarray


@dataclass
class Dbn:
    """Stacked RBMs followed by a softmax (logistic-regression) head"""

    layers: List[Rbm]
    head: DenseLayer

    def __post_init__(self):
        if not self.layers:
            raise ShapeError("A DBN needs at least one RBM")
        for k in range(len(self.layers) - 1):
            if self.layers[k].n_hidden != self.layers[k + 1].n_visible:
                raise ShapeError(
                    f"RBM {k} has {self.layers[k].n_hidden} hidden units but RBM {k + 1} "
                    f"expects {self.layers[k + 1].n_visible} visible units"
                )
        if self.head.in_features != self.layers[-1].n_hidden:
            raise ShapeError("Head input size must equal the top RBM's hidden size")
        if self.head.activation != "softmax":
            raise ValueError("DBN head must use softmax")

    @classmethod
    def initialize(cls, sizes: List[int], num_classes: int, rng: RngStream) -> "Dbn":
        layers = [Rbm.initialize(n_v, n_h, rng) for n_v, n_h in zip(sizes[:-1], sizes[1:])]
        head = DenseLayer.initialize(sizes[-1], num_classes, rng, activation="softmax")
        return cls(layers, head)


def _check_binary(x: np.ndarray, name: str) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    if not np.all((x == 0.0) | (x == 1.0)):
        raise ValueError(f"{name} must be binary (0/1)")
    return x


def _check_enumerable(rbm: Rbm) -> None:
    units = rbm.n_visible + rbm.n_hidden
    if units > MAX_ENUMERATION_UNITS:
        raise EnumerationLimitError(
            f"Exhaustive enumeration over {units} units exceeds the limit of {MAX_ENUMERATION_UNITS}"
        )


def _all_configurations(n: int) -> np.ndarray:
    return np.array(list(itertools.product((0.0, 1.0), repeat=n))).reshape(2 ** n, n)


def energy(rbm: Rbm, v: Tensor, h: Tensor) -> float:
    v = _check_binary(v, "v")
    h = _check_binary(h, "h")
    if v.shape != (rbm.n_visible,) or h.shape != (rbm.n_hidden,):
        raise ShapeError(f"Expected v [{rbm.n_visible}] and h [{rbm.n_hidden}]")
    return float(-(v @ rbm.W @ h) - rbm.a @ v - rbm.b @ h)


def _negative_energies(rbm: Rbm) -> np.ndarray:
    """-E over every (v, h) pair: [2^n_v, 2^n_h]"""
    vs = _all_configurations(rbm.n_visible)
    hs = _all_configurations(rbm.n_hidden)
    return vs @ rbm.W @ hs.T + (vs @ rbm.a)[:, None] + (hs @ rbm.b)[None, :]


def log_partition_function(rbm: Rbm) -> float:
    _check_enumerable(rbm)
    return float(special.logsumexp(_negative_energies(rbm)))


def partition_function(rbm: Rbm) -> float:
    """Z = sum over all 2^(n_v+n_h) configurations of exp(-E)"""
    return float(np.exp(log_partition_function(rbm)))


def joint_probability(rbm: Rbm, v: Tensor, h: Tensor) -> float:
    _check_enumerable(rbm)
    return float(np.exp(-energy(rbm, v, h) - log_partition_function(rbm)))


def _hidden_probs(rbm: Rbm, v: np.ndarray) -> np.ndarray:
    return special.expit(rbm.b + v @ rbm.W)


def _visible_probs(rbm: Rbm, h: np.ndarray) -> np.ndarray:
    return special.expit(rbm.a + h @ rbm.W.T)


def hidden_given_visible(rbm: Rbm, v: Tensor) -> Tensor:
    """p(h_j = 1 | v) = sigmoid(b_j + sum_i w_ij v_i)"""
    v = _check_binary(v, "v")
    if v.shape[-1] != rbm.n_visible:
        raise ShapeError(f"v must have {rbm.n_visible} units, got {v.shape}")
    return _hidden_probs(rbm, v)


def visible_given_hidden(rbm: Rbm, h: Tensor) -> Tensor:
    """p(v_i = 1 | h) = sigmoid(a_i + sum_j w_ij h_j)"""
    h = _check_binary(h, "h")
    if h.shape[-1] != rbm.n_hidden:
        raise ShapeError(f"h must have {rbm.n_hidden} units, got {h.shape}")
    return _visible_probs(rbm, h)


def cd_update(rbm: Rbm, v0: Tensor, learning_rate: float, rng: RngStream, k: int = 1,
              reconstruction: Optional[np.ndarray] = None) -> RbmDelta:
    """
    Contrastive-divergence update of ``rbm`` in place.

    Runs k Gibbs steps v0 -> h0 -> v1 -> ... with sampled hidden and visible
    states; the negative phase uses hidden probabilities. ``v0`` may be one
    vector or a batch [N, n_visible]; batch statistics are averaged.

    Args:
        rbm: machine to update
        v0: binary visible data
        learning_rate: step size (> 0)
        rng: stream used for every Bernoulli sample
        k: number of Gibbs steps
        reconstruction: forces the final visible sample (test hook)

    Returns:
        The applied deltas
    """
    if learning_rate <= 0:
        raise ValueError(f"learning_rate must be > 0, got {learning_rate}")
    if k < 1:
        raise ValueError(f"k must be >= 1, got {k}")
    v0 = _check_binary(v0, "v0")
    batch = np.atleast_2d(v0)
    if batch.shape[1] != rbm.n_visible:
        raise ShapeError(f"v0 must have {rbm.n_visible} units, got {v0.shape}")

    ph0 = _hidden_probs(rbm, batch)
    h = rng.bernoulli(ph0)
    for _ in range(k):
        v1 = rng.bernoulli(_visible_probs(rbm, h))
        ph1 = _hidden_probs(rbm, v1)
        h = rng.bernoulli(ph1)
    if reconstruction is not None:
        v1 = np.atleast_2d(_check_binary(reconstruction, "reconstruction"))
        ph1 = _hidden_probs(rbm, v1)

    n = batch.shape[0]
    delta = RbmDelta(
        dW=learning_rate * (batch.T @ ph0 - v1.T @ ph1) / n,
        da=learning_rate * (batch - v1).mean(axis=0),
        db=learning_rate * (ph0 - ph1).mean(axis=0),
    )
    rbm.W += delta.dW
    rbm.a += delta.da
    rbm.b += delta.db
    return delta


def cd1_update(rbm: Rbm, v0: Tensor, learning_rate: float, rng: RngStream,
               reconstruction: Optional[np.ndarray] = None) -> RbmDelta:
    return cd_update(rbm, v0, learning_rate, rng, k=1, reconstruction=reconstruction)


def reconstruction_cross_entropy(rbm: Rbm, v: np.ndarray) -> float:
    """Mean binary cross-entropy of the deterministic reconstruction of ``v``"""
    v = np.atleast_2d(np.asarray(v, dtype=np.float64))
    recon = np.clip(_visible_probs(rbm, _hidden_probs(rbm, v)), 1e-12, 1.0 - 1e-12)
    return float(-np.mean(v * np.log(recon) + (1.0 - v) * np.log(1.0 - recon)))


def pretrain_layerwise(dbn: Dbn, data: Tensor, epochs: int, lr: float, rng: RngStream,
                       batch_size: int = 32, k: int = 1) -> Dbn:
    """
    Greedy bottom-up CD training of every RBM in ``dbn``.

    Layer inputs are binarized at 0.5 for sampling; layer k+1 trains on the
    hidden probabilities of layer k.
    """
    data = np.asarray(data, dtype=np.float64)
    if data.ndim != 2 or data.shape[1] != dbn.layers[0].n_visible:
        raise ShapeError(f"Data must be [N, {dbn.layers[0].n_visible}], got {data.shape}")
    if np.any(data < 0.0) or np.any(data > 1.0):
        raise ValueError("Pretraining data must lie in [0, 1]")

    inputs = data
    for index, rbm in enumerate(dbn.layers):
        if inputs.shape[1] != rbm.n_visible:
            raise ShapeError(f"Layer {index} expects {rbm.n_visible} inputs, got {inputs.shape[1]}")
        binary = (inputs >= 0.5).astype(np.float64)
        for epoch in range(epochs):
            order = rng.permutation(binary.shape[0])
            for start in range(0, len(order), batch_size):
                cd_update(rbm, binary[order[start:start + batch_size]], lr, rng, k=k)
            logger.debug(
                f"RBM {index} epoch {epoch + 1}/{epochs}: "
                f"reconstruction CE={reconstruction_cross_entropy(rbm, binary):.4f}"
            )
        inputs = _hidden_probs(rbm, inputs)
    logger.info(f"Pretrained {len(dbn.layers)} RBM layer(s) for {epochs} epoch(s)")
    return dbn


def dbn_forward(dbn: Dbn, x: Tensor) -> Tensor:
    """Class probabilities for one input vector"""
    x = np.asarray(x, dtype=np.float64)
    if x.shape != (dbn.layers[0].n_visible,):
        raise ShapeError(f"x must have length {dbn.layers[0].n_visible}, got {x.shape}")
    for rbm in dbn.layers:
        x = _hidden_probs(rbm, x)
    return special.softmax(dbn.head.weights @ x + dbn.head.bias)


class RbmLayer(Layer):
    """Deterministic up-pass of an RBM, sigmoid(x W + b), inside a network"""

    name = "rbm"

    def __init__(self, rbm: Rbm, trainable: bool = True):
        super().__init__()
        self.rbm = rbm
        self.trainable = trainable

    def parameters(self):
        return {"W": self.rbm.W, "b": self.rbm.b}

    def forward(self, x, training=False):
        if x.ndim != 2 or x.shape[1] != self.rbm.n_visible:
            raise ShapeError(f"rbm expects [N, {self.rbm.n_visible}], got {x.shape}")
        y = _hidden_probs(self.rbm, x)
        self._cache = (x, y)
        return y

    def backward(self, grad):
        x, y = self._cache
        dz = grad * y * (1.0 - y)
        self.grads = {"W": x.T @ dz, "b": dz.sum(axis=0)}
        return dz @ self.rbm.W.T
