"""Dense vector/matrix helpers and a portable, seedable random source.

Vectors and matrices are plain float64 numpy arrays. The helpers here only add
the shape checks the rest of the package relies on. ``Rng`` is a counter-based
SplitMix64 generator so that every draw is defined by (seed, counter) alone and
results do not depend on the numpy version or platform.
"""

from __future__ import annotations

import numpy as np

__all__ = [
    "ShapeError",
    "as_vector",
    "as_matrix",
    "check_finite",
    "matvec",
    "hadamard",
    "Rng",
    "rng_normal",
]


class ShapeError(ValueError):
    """Raised when array dimensions do not line up."""


def as_vector(v, name="vector") -> np.ndarray:
    arr = np.asarray(v, dtype=np.float64)
    if arr.ndim != 1:
        raise ShapeError(f"{name} must be 1-D, got shape {arr.shape}")
    return arr


def as_matrix(m, name="matrix") -> np.ndarray:
    arr = np.asarray(m, dtype=np.float64)
    if arr.ndim != 2:
        raise ShapeError(f"{name} must be 2-D, got shape {arr.shape}")
    return arr


def check_finite(arr, name="array"):
    if not np.all(np.isfinite(arr)):
        raise FloatingPointError(f"{name} contains NaN or Inf")
    return arr


def matvec(m, v) -> np.ndarray:
    m = as_matrix(m)
    v = as_vector(v)
    if m.shape[1] != v.shape[0]:
        raise ShapeError(f"matvec: matrix has {m.shape[1]} columns, vector has length {v.shape[0]}")
    return m @ v


def hadamard(a, b) -> np.ndarray:
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise ShapeError(f"hadamard: shapes {a.shape} and {b.shape} differ")
    return a * b


_MASK64 = (1 << 64) - 1
_GAMMA = np.uint64(0x9E3779B97F4A7C15)
_MIX1 = np.uint64(0xBF58476D1CE4E5B9)
_MIX2 = np.uint64(0x94D049BB133111EB)


def _splitmix(z: np.ndarray) -> np.ndarray:
    with np.errstate(over="ignore"):
        z = (z ^ (z >> np.uint64(30))) * _MIX1
        z = (z ^ (z >> np.uint64(27))) * _MIX2
    return z ^ (z >> np.uint64(31))


class Rng:
    """SplitMix64 in counter mode.

    Draw ``i`` (1-based, across the lifetime of the generator) is
    ``mix(seed + i * golden_gamma)``. Vectorized draws therefore produce the
    same stream as drawing one value at a time.
    """

    def __init__(self, seed: int = 0):
        self.seed = int(seed) & _MASK64
        self.counter = 0

    def __repr__(self):
        return f"Rng(seed={self.seed}, counter={self.counter})"

    def child(self, *keys: int) -> "Rng":
        """Independent generator derived from this seed and integer keys.

        Does not advance this generator's stream.
        """
        state = np.array([self.seed], dtype=np.uint64)
        for key in keys:
            with np.errstate(over="ignore"):
                state = _splitmix(state ^ _splitmix(np.array([int(key) & _MASK64], dtype=np.uint64) + _GAMMA))
        return Rng(int(state[0]))

    def bits(self, n: int) -> np.ndarray:
        """``n`` raw 64-bit outputs."""
        idx = np.arange(self.counter + 1, self.counter + n + 1, dtype=np.uint64)
        self.counter += n
        with np.errstate(over="ignore"):
            z = np.uint64(self.seed) + idx * _GAMMA
        return _splitmix(z)

    def uniform(self, n: int) -> np.ndarray:
        """``n`` floats uniform on [0, 1) with 53-bit resolution."""
        return (self.bits(n) >> np.uint64(11)).astype(np.float64) * (1.0 / 9007199254740992.0)

    def uniform_range(self, low: float, high: float, n: int) -> np.ndarray:
        return low + (high - low) * self.uniform(n)

    def normal(self, n: int) -> np.ndarray:
        """``n`` standard normal draws via Box-Muller (both branches used)."""
        pairs = (n + 1) // 2
        u = self.uniform(2 * pairs)
        u1 = 1.0 - u[:pairs]  # (0, 1], keeps log finite
        u2 = u[pairs:]
        r = np.sqrt(-2.0 * np.log(u1))
        theta = 2.0 * np.pi * u2
        out = np.empty(2 * pairs)
        out[0::2] = r * np.cos(theta)
        out[1::2] = r * np.sin(theta)
        return out[:n]

    def integers(self, low: int, high: int, n: int) -> np.ndarray:
        """``n`` integers uniform on [low, high)."""
        if high <= low:
            raise ValueError(f"empty integer range [{low}, {high})")
        span = high - low
        vals = np.floor(self.uniform(n) * span).astype(np.int64)
        return low + np.minimum(vals, span - 1)

    def permutation(self, n: int) -> np.ndarray:
        return np.argsort(self.uniform(n), kind="stable")


def rng_normal(r: Rng, n: int) -> np.ndarray:
    if n < 1:
        raise ValueError("n must be >= 1")
    return r.normal(n)
