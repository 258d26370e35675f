"""Dense tensor primitives and seeded random streams

A Tensor is a float64 numpy array stored row-major (C order): element
``(i0, i1, ..., ik)`` of a tensor with shape ``(d0, ..., dk)`` lives at flat
offset ``((i0 * d1 + i1) * d2 + i2) ... * dk + ik``. Every public operation
returns a fresh array; inputs are never modified in place.
"""
from typing import Callable, Dict, Sequence, Tuple

import numpy as np
import numpy.typing as npt
from scipy import special

from ecgbench.core.exceptions import NumericError, ShapeError

Tensor = npt.NDArray[np.float64]

# largest double below 1 and smallest positive double
OPEN_HIGH = float(np.nextafter(1.0, 0.0))
OPEN_LOW = float(np.nextafter(0.0, 1.0))


def sigmoid(x: np.ndarray) -> np.ndarray:
    """Logistic function kept strictly inside (0, 1) for every finite input"""
    return np.clip(special.expit(x), OPEN_LOW, OPEN_HIGH)


def tanh(x: np.ndarray) -> np.ndarray:
    """Hyperbolic tangent kept strictly inside (-1, 1) for every finite input"""
    return np.clip(np.tanh(x), -OPEN_HIGH, OPEN_HIGH)


ACTIVATIONS: Dict[str, Callable[[np.ndarray], np.ndarray]] = {
    "sigmoid": sigmoid,
    "tanh": tanh,
    "relu": lambda x: np.maximum(x, 0.0),
}


class RngStream:
    """
    Single-owner deterministic random stream.

    Uniform draws come from numpy's PCG64 bit generator; normal draws use the
    Box-Muller transform on pairs of those uniforms, so a (seed, algorithm_id)
    pair fixes the whole sequence.
    """

    algorithm_id = "pcg64"

    def __init__(self, seed: int):
        if seed < 0 or seed >= 2 ** 64:
            raise ValueError(f"Seed must be a 64-bit unsigned integer, got {seed}")
        self.seed = int(seed)
        self._generator = np.random.Generator(np.random.PCG64(self.seed))

    def __repr__(self):
        return f"<RngStream {self.algorithm_id} seed={self.seed}>"

    def uniform(self, shape: Sequence[int] = (), low: float = 0.0, high: float = 1.0) -> np.ndarray:
        """Uniform draws in [low, high)"""
        return low + (high - low) * self._generator.random(tuple(shape))

    def standard_normal(self, shape: Sequence[int]) -> np.ndarray:
        """N(0, 1) draws via Box-Muller"""
        count = int(np.prod(shape, dtype=np.int64))
        pairs = (count + 1) // 2
        u1 = 1.0 - self._generator.random(pairs)  # (0, 1], keeps log finite
        u2 = self._generator.random(pairs)
        radius = np.sqrt(-2.0 * np.log(u1))
        angle = 2.0 * np.pi * u2
        values = np.concatenate([radius * np.cos(angle), radius * np.sin(angle)])
        return values[:count].reshape(tuple(shape))

    def integers(self, low: int, high: int, size=None) -> np.ndarray:
        """Integers in [low, high)"""
        return self._generator.integers(low, high, size=size)

    def permutation(self, n: int) -> np.ndarray:
        return self._generator.permutation(n)

    def bernoulli(self, p: np.ndarray) -> np.ndarray:
        """0/1 samples with elementwise success probability ``p``"""
        p = np.asarray(p, dtype=np.float64)
        return (self._generator.random(p.shape) < p).astype(np.float64)


def _check_shape(shape: Sequence[int]) -> Tuple[int, ...]:
    shape = tuple(int(d) for d in shape)
    if not shape:
        raise ShapeError("Shape must have at least one dimension")
    if any(d < 1 for d in shape):
        raise ShapeError(f"All dimensions must be >= 1, got {shape}")
    return shape


def _finite(t: np.ndarray, op: str) -> np.ndarray:
    if not np.all(np.isfinite(t)):
        raise NumericError(f"{op} produced non-finite values")
    return t


def tensor(values, shape: Sequence[int] = None) -> Tensor:
    """Build a tensor from nested sequences or flat data plus a shape"""
    t = np.array(values, dtype=np.float64)
    if shape is not None:
        shape = _check_shape(shape)
        if t.size != int(np.prod(shape)):
            raise ShapeError(f"{t.size} values do not fill shape {shape}")
        t = t.reshape(shape)
    return _finite(t, "tensor")


def zeros(shape: Sequence[int]) -> Tensor:
    return np.zeros(_check_shape(shape), dtype=np.float64)


def identity(n: int) -> Tensor:
    return np.eye(n, dtype=np.float64)


def matmul(a: Tensor, b: Tensor) -> Tensor:
    """Rank-2 product: ``[m, k] x [k, n] -> [m, n]``"""
    if a.ndim != 2 or b.ndim != 2:
        raise ShapeError(f"matmul expects rank-2 operands, got {a.shape} and {b.shape}")
    if a.shape[1] != b.shape[0]:
        raise ShapeError(f"Inner dimensions differ: {a.shape} x {b.shape}")
    if a.shape[1] == 0:
        raise ShapeError("Inner dimension must be >= 1")
    return _finite(a @ b, "matmul")


def map_elementwise(t: Tensor, fn_id: str) -> Tensor:
    try:
        fn = ACTIVATIONS[fn_id]
    except KeyError:
        raise ValueError(f"Unknown elementwise function: {fn_id}") from None
    return np.asarray(fn(np.asarray(t, dtype=np.float64)), dtype=np.float64)


def random_normal(shape: Sequence[int], mean: float, stddev: float, rng: RngStream) -> Tensor:
    shape = _check_shape(shape)
    if stddev < 0:
        raise ValueError(f"stddev must be >= 0, got {stddev}")
    if stddev == 0:
        return np.full(shape, float(mean), dtype=np.float64)
    return mean + stddev * rng.standard_normal(shape)


def random_uniform(shape: Sequence[int], low: float, high: float, rng: RngStream) -> Tensor:
    return rng.uniform(_check_shape(shape), low, high)


def _same_shape(a: Tensor, b: Tensor, op: str) -> None:
    if a.shape != b.shape:
        raise ShapeError(f"{op}: shapes differ {a.shape} vs {b.shape}")


def add(a: Tensor, b: Tensor) -> Tensor:
    _same_shape(a, b, "add")
    return _finite(a + b, "add")


def subtract(a: Tensor, b: Tensor) -> Tensor:
    _same_shape(a, b, "subtract")
    return _finite(a - b, "subtract")


def hadamard(a: Tensor, b: Tensor) -> Tensor:
    _same_shape(a, b, "hadamard")
    return _finite(a * b, "hadamard")


def scale(t: Tensor, factor: float) -> Tensor:
    return _finite(t * float(factor), "scale")


def concat_rows(a: Tensor, b: Tensor) -> Tensor:
    """Stack along the first axis; 1-D operands are concatenated end to end"""
    if a.shape[1:] != b.shape[1:]:
        raise ShapeError(f"concat_rows: trailing shapes differ {a.shape} vs {b.shape}")
    return np.concatenate([a, b], axis=0)


def transpose(t: Tensor) -> Tensor:
    if t.ndim != 2:
        raise ShapeError(f"transpose expects rank 2, got {t.shape}")
    return np.ascontiguousarray(t.T)


def reshape(t: Tensor, shape: Sequence[int]) -> Tensor:
    shape = _check_shape(shape)
    if t.size != int(np.prod(shape)):
        raise ShapeError(f"Cannot reshape {t.shape} to {shape}")
    return t.reshape(shape).copy()


def slice_rows(t: Tensor, start: int, stop: int) -> Tensor:
    if not 0 <= start < stop <= t.shape[0]:
        raise ShapeError(f"Row slice [{start}:{stop}] outside 0..{t.shape[0]}")
    return t[start:stop].copy()


def total(t: Tensor) -> float:
    return float(np.sum(t))


def argmax_row(t: Tensor) -> np.ndarray:
    """Index of the largest element per row (first one on ties)"""
    if t.ndim != 2:
        raise ShapeError(f"argmax_row expects rank 2, got {t.shape}")
    return np.argmax(t, axis=1)


def softmax(t: Tensor, axis: int = -1) -> Tensor:
    return special.softmax(t, axis=axis)
