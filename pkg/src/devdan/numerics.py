"""Small numerical kernels: stable nonlinearities, running moments, Xavier draws.

Everything runs in 64-bit floats. The running-moment recurrence is one-pass
(Welford) with population normalization, which is what the drift monitors
assume: every incoming sample updates the estimate exactly once.
"""
from __future__ import annotations

import math

import numpy as np

from .errors import ShapeError

Mat = np.ndarray  # 2-d float64 array, row-major


def matmul(a: Mat, b: Mat) -> Mat:
    """Checked matrix product. Raises ShapeError on incompatible operands."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.ndim != 2 or b.ndim != 2:
        raise ShapeError(f"matmul expects 2-d operands, got {a.ndim}-d and {b.ndim}-d")
    if a.shape[1] != b.shape[0]:
        raise ShapeError(f"matmul shape mismatch: {a.shape} x {b.shape}")
    return a @ b


def sigmoid(x):
    """Logistic function, stable for large |x| (saturates instead of overflowing)."""
    return np.exp(-np.logaddexp(0.0, -np.asarray(x, dtype=np.float64)))


def softmax_row(logits):
    """Probability vector from a row of logits, computed with max-subtraction."""
    v = np.asarray(logits, dtype=np.float64)
    shifted = v - v.max(axis=-1, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=-1, keepdims=True)


class RunningMoment:
    """One-pass mean and standard deviation of a scalar stream.

    std is the population form sqrt(m2 / count); it is 0 until the second
    sample arrives.
    """

    __slots__ = ("count", "mean", "m2")

    def __init__(self, count: int = 0, mean: float = 0.0, m2: float = 0.0):
        self.count = count
        self.mean = mean
        self.m2 = m2

    def update(self, x: float) -> None:
        self.count += 1
        delta = x - self.mean
        self.mean += delta / self.count
        self.m2 += delta * (x - self.mean)

    @property
    def std(self) -> float:
        if self.count <= 1:
            return 0.0
        return math.sqrt(self.m2 / self.count)

    def copy(self) -> "RunningMoment":
        return RunningMoment(self.count, self.mean, self.m2)

    def __repr__(self):
        return f"RunningMoment(count={self.count}, mean={self.mean}, m2={self.m2})"


def welford_update(s: RunningMoment, x: float) -> RunningMoment:
    """Functional form of RunningMoment.update: returns the advanced moment."""
    out = s.copy()
    out.update(x)
    return out


def xavier_bound(fan_in: int, fan_out: int) -> float:
    return math.sqrt(6.0 / (fan_in + fan_out))


def xavier(rng: np.random.Generator, fan_in: int, fan_out: int, size=None):
    """Uniform draw(s) on [-sqrt(6/(fan_in+fan_out)), +sqrt(6/(fan_in+fan_out))]."""
    bound = xavier_bound(fan_in, fan_out)
    return rng.uniform(-bound, bound, size=size)
