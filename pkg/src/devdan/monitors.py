"""Network-significance machinery.

The expected squared reconstruction (or prediction) error is decomposed into
a squared-bias term and a variance term, both computable online: per-node
running moments of the hidden pre-activations feed a probit approximation of
the expected sigmoid activation, which in turn yields expected outputs and
expected squared outputs. The two scalar streams are watched by
statistical-process-control trackers whose confidence factors adapt to the
current bias/variance level; crossing the control limit grows (high bias) or
prunes (high variance) a hidden node.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import MonitorOrderError, ShapeError, StructureError
from .numerics import RunningMoment, sigmoid, softmax_row

_PROBIT_SCALE = math.pi / 8.0


def expected_activation(mu, sigma):
    """E[sigmoid(A)] for A ~ N(mu, sigma^2), via the probit approximation.

    Exact when sigma = 0. Accepts scalars or arrays.
    """
    mu = np.asarray(mu, dtype=np.float64)
    sigma = np.asarray(sigma, dtype=np.float64)
    out = sigmoid(mu / np.sqrt(1.0 + _PROBIT_SCALE * sigma * sigma))
    return float(out) if out.ndim == 0 else out


class NodeStats:
    """Running moments of each hidden node's pre-activation stream.

    Counts are per node: a freshly grown node starts at zero and only begins
    contributing its own statistics after its first update (until then its
    expected activation is the uninformative 0.5).
    """

    __slots__ = ("count", "mean", "m2")

    def __init__(self, width: int):
        self.count = np.zeros(width, dtype=np.int64)
        self.mean = np.zeros(width, dtype=np.float64)
        self.m2 = np.zeros(width, dtype=np.float64)

    @property
    def width(self) -> int:
        return self.mean.shape[0]

    def update(self, a: np.ndarray) -> None:
        """Fold one pre-activation vector (length = width) into the moments."""
        if a.shape != self.mean.shape:
            raise ShapeError(f"stats width {self.width} does not match input {a.shape}")
        self.count += 1
        delta = a - self.mean
        self.mean += delta / self.count
        self.m2 += delta * (a - self.mean)

    def stds(self) -> np.ndarray:
        out = np.zeros_like(self.mean)
        seen = self.count > 1
        np.divide(self.m2, self.count, out=out, where=seen)
        return np.sqrt(out, out=out)

    def expected_activations(self) -> np.ndarray:
        return expected_activation(self.mean, self.stds())

    def add_node(self) -> None:
        self.count = np.concatenate([self.count, [0]])
        self.mean = np.concatenate([self.mean, [0.0]])
        self.m2 = np.concatenate([self.m2, [0.0]])

    def remove_node(self, index: int) -> None:
        self.count = np.delete(self.count, index)
        self.mean = np.delete(self.mean, index)
        self.m2 = np.delete(self.m2, index)


class SpcTracker:
    """Control chart over a scalar quality stream (squared bias or variance).

    Tracks the running mean/std of the stream plus the lowest mean and lowest
    std observed since the last reset. After a reset the minima re-seed from
    the next observation instead of from infinity sentinels, which is what
    lets the chart find a new reference level after a drift.
    """

    __slots__ = ("current", "min_mean", "min_std", "_reseed")

    def __init__(self):
        self.current = RunningMoment()
        self.min_mean = 0.0
        self.min_std = 0.0
        self._reseed = True

    def update(self, x: float) -> None:
        self.current.update(x)
        if self._reseed:
            self.min_mean = self.current.mean
            self.min_std = self.current.std
            self._reseed = False
        else:
            self.min_mean = min(self.min_mean, self.current.mean)
            self.min_std = min(self.min_std, self.current.std)

    def reset_min(self, mode: str = "standard") -> None:
        """Arm a re-seed of the minima; 'reset_all' additionally zeroes the
        running moments (the empirically inferior variant kept as a switch)."""
        if mode not in ("standard", "reset_all"):
            raise StructureError(f"unknown reset mode {mode!r}")
        self._reseed = True
        if mode == "reset_all":
            self.current = RunningMoment()


def kappa(bias2: float) -> float:
    """Confidence factor for the growing test; 2.0 at zero bias, ~0.7 at high bias."""
    return 1.3 * math.exp(-bias2) + 0.7


def chi(variance: float) -> float:
    """Confidence factor for the pruning test; same law as kappa."""
    return 1.3 * math.exp(-variance) + 0.7


def should_grow(tracker: SpcTracker, bias2_now: float) -> bool:
    """Growing test: mean + std of the bias stream crossed the minimum level
    scaled by the adaptive confidence factor. The tracker must already have
    absorbed bias2_now. Inclusive inequality; the caller resets the minima
    when this fires."""
    cur = tracker.current
    return cur.mean + cur.std >= tracker.min_mean + kappa(bias2_now) * tracker.min_std


def should_prune(tracker: SpcTracker, variance_now: float, grew_this_step: bool, width: int) -> bool:
    """Pruning test: variance stream crossed twice the chi-scaled minimum level.

    Refuses to fire on the same step as a grow (a fresh node transiently
    inflates variance) and never below two nodes. The caller resets the
    minima when this fires."""
    if grew_this_step or width <= 1:
        return False
    cur = tracker.current
    limit = tracker.min_mean + 2.0 * chi(max(variance_now, 0.0)) * tracker.min_std
    return cur.mean + cur.std >= limit


def hidden_significance(stats: NodeStats) -> np.ndarray:
    """Per-node importance: expected activation over the data seen so far."""
    return stats.expected_activations()


def weakest_node(hs) -> int:
    """Index of the least significant node; ties go to the lowest index."""
    hs = np.asarray(hs, dtype=np.float64)
    if hs.shape[0] < 2:
        raise StructureError("need at least two nodes to pick the weakest")
    return int(np.argmin(hs))


@dataclass(frozen=True)
class NsSnapshot:
    """One evaluation of the bias/variance estimate.

    ey  : expected hidden activations (length = width)
    ez  : expected outputs (length n for reconstruction, m for prediction)
    ez2 : expected squared outputs, same length as ez
    bias2, variance : scalar aggregates (mean over output dimensions)
    ns = bias2 + variance, stored rather than recomputed
    """

    ey: np.ndarray
    ez: np.ndarray
    ez2: np.ndarray
    bias2: float
    variance: float
    ns: float


def _require_updated(stats: NodeStats) -> None:
    if int(stats.count.sum()) == 0:
        raise MonitorOrderError(
            "node statistics were never updated; update them before taking a snapshot"
        )


def ns_snapshot_generative(layer, stats: NodeStats, x: np.ndarray) -> NsSnapshot:
    """Bias/variance of the reconstruction against clean input x.

    ez  = sigmoid(ey @ w.T + c)
    ez2 = sigmoid((ey * ey) @ w.T + c)
    bias2 = mean_j (x_j - ez_j)^2, variance = mean_j (ez2_j - ez_j^2).
    """
    _require_updated(stats)
    if stats.width != layer.width:
        raise ShapeError(f"stats width {stats.width} does not match layer {layer.width}")
    ey = stats.expected_activations()
    ez = sigmoid(ey @ layer.w.T + layer.c)
    ez2 = sigmoid((ey * ey) @ layer.w.T + layer.c)
    bias2 = float(np.mean((x - ez) ** 2))
    variance = float(np.mean(ez2 - ez * ez))
    return NsSnapshot(ey, ez, ez2, bias2, variance, bias2 + variance)


def ns_snapshot_discriminative(
    theta: np.ndarray, eta: np.ndarray, stats: NodeStats, onehot: np.ndarray
) -> NsSnapshot:
    """Bias/variance of the class-probability output against a 0-1 target."""
    _require_updated(stats)
    if stats.width != theta.shape[0]:
        raise ShapeError(f"stats width {stats.width} does not match head {theta.shape}")
    ey = stats.expected_activations()
    ec = softmax_row(ey @ theta + eta)
    ec2 = softmax_row((ey * ey) @ theta + eta)
    bias2 = float(np.mean((onehot - ec) ** 2))
    variance = float(np.mean(ec2 - ec * ec))
    return NsSnapshot(ey, ec, ec2, bias2, variance, bias2 + variance)
