"""The full evolving model: a tied-weight denoising autoencoder feeding a
softmax head, trained per sample in two phases.

The generative phase reconstructs masked inputs and evolves the hidden layer
from its reconstruction bias/variance; the discriminative phase trains
encoder plus head on labeled samples with momentum SGD and evolves the same
hidden layer from prediction bias/variance. The two phases keep separate node
statistics (corrupted vs clean pre-activations) and separate control
trackers, all attached to one shared layer.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from . import dae
from .errors import ConfigError, NumericError, ShapeError
from .monitors import (
    NodeStats,
    SpcTracker,
    hidden_significance,
    ns_snapshot_discriminative,
    ns_snapshot_generative,
    should_grow,
    should_prune,
    weakest_node,
)
from .numerics import sigmoid, softmax_row, xavier


@dataclass
class DevdanConfig:
    """Hyperparameters and variant switches.

    Defaults: discriminative / generative learning rates 0.01 / 0.001,
    momentum 0.95 (discriminative phase only), 10% masking noise. reset_mode
    'reset_all' selects the variant that also zeroes the running tracker
    moments on a trigger.
    """

    lr_generative: float = 0.001
    lr_discriminative: float = 0.01
    momentum: float = 0.95
    mask_fraction: float = 0.10
    reset_mode: str = "standard"
    enable_generative: bool = True
    enable_grow: bool = True
    enable_prune: bool = True
    seed: int = 0

    def validate(self) -> None:
        if self.lr_generative < 0 or self.lr_discriminative < 0:
            raise ConfigError("learning rates must be non-negative")
        if not 0.0 <= self.momentum < 1.0:
            raise ConfigError("momentum must lie in [0, 1)")
        if not 0.0 <= self.mask_fraction <= 1.0:
            raise ConfigError("mask_fraction must lie in [0, 1]")
        if self.reset_mode not in ("standard", "reset_all"):
            raise ConfigError(f"unknown reset_mode {self.reset_mode!r}")


class SoftmaxHead:
    """Output layer: theta (width x m), eta (m,), plus momentum slots."""

    __slots__ = ("theta", "eta", "vel_theta", "vel_eta")

    def __init__(self, width: int, n_classes: int, rng: np.random.Generator):
        self.theta = xavier(rng, width, n_classes, size=(width, n_classes))
        self.eta = np.zeros(n_classes)
        self.vel_theta = np.zeros((width, n_classes))
        self.vel_eta = np.zeros(n_classes)

    @property
    def n_classes(self) -> int:
        return self.theta.shape[1]

    @property
    def width(self) -> int:
        return self.theta.shape[0]

    def add_node(self, rng: np.random.Generator) -> None:
        """Append a Xavier-drawn row for a new hidden node; zero its velocity."""
        row = xavier(rng, self.width + 1, self.n_classes, size=(1, self.n_classes))
        self.theta = np.concatenate([self.theta, row], axis=0)
        self.vel_theta = np.concatenate([self.vel_theta, np.zeros((1, self.n_classes))], axis=0)

    def remove_node(self, index: int) -> None:
        self.theta = np.delete(self.theta, index, axis=0)
        self.vel_theta = np.delete(self.vel_theta, index, axis=0)


class StepReport(NamedTuple):
    grew: bool
    pruned: bool
    loss: float
    width_after: int


@dataclass
class BatchReport:
    """Aggregates of one training pass over a batch."""

    generative_loss: float
    discriminative_loss: float
    grow_events: int
    prune_events: int
    width_after: int
    generative_steps: int
    discriminative_steps: int


class DevdanModel:
    """One evolving network plus all of its monitor state.

    Exclusively owned by a single caller; prediction never mutates anything,
    training steps mutate everything in a fixed order.
    """

    def __init__(
        self,
        n_in: int,
        n_classes: int,
        config: DevdanConfig | None = None,
        rng: np.random.Generator | None = None,
    ):
        self.config = config or DevdanConfig()
        self.config.validate()
        self.rng = rng if rng is not None else np.random.default_rng(self.config.seed)
        self.layer = dae.DaeLayer.fresh(n_in, self.rng)
        self.head = SoftmaxHead(self.layer.width, n_classes, self.rng)
        self.mask = dae.MaskSpec(self.config.mask_fraction, self.rng)
        self.gen_stats = NodeStats(self.layer.width)
        self.disc_stats = NodeStats(self.layer.width)
        self.gen_bias = SpcTracker()
        self.gen_var = SpcTracker()
        self.disc_bias = SpcTracker()
        self.disc_var = SpcTracker()
        # discriminative-phase momentum slots for the shared encoder
        self.vel_w = np.zeros_like(self.layer.w)
        self.vel_b = np.zeros_like(self.layer.b)

    @property
    def n_in(self) -> int:
        return self.layer.n_in

    @property
    def n_classes(self) -> int:
        return self.head.n_classes

    @property
    def width(self) -> int:
        return self.layer.width

    # ------------------------------------------------------------------ predict

    def predict(self, x: np.ndarray):
        """Class probabilities and predicted class for one sample."""
        x = np.asarray(x, dtype=np.float64)
        if x.shape != (self.n_in,):
            raise ShapeError(f"input shape {x.shape} does not match n={self.n_in}")
        h = sigmoid(x @ self.layer.w + self.layer.b)
        probs = softmax_row(h @ self.head.theta + self.head.eta)
        return probs, int(np.argmax(probs))

    def predict_batch(self, xs: np.ndarray):
        """Vectorized predict over the rows of xs; returns (probs, classes)."""
        xs = np.asarray(xs, dtype=np.float64)
        if xs.ndim != 2 or xs.shape[1] != self.n_in:
            raise ShapeError(f"batch shape {xs.shape} does not match n={self.n_in}")
        h = sigmoid(xs @ self.layer.w + self.layer.b)
        probs = softmax_row(h @ self.head.theta + self.head.eta)
        return probs, np.argmax(probs, axis=1)

    # ----------------------------------------------------------- structural ops

    def _grow_generative(self, residual: np.ndarray) -> None:
        dae.grow_node_generative(self.layer, residual, self.rng)
        self.head.add_node(self.rng)
        self._extend_slots()

    def _grow_discriminative(self) -> None:
        dae.grow_node_xavier(self.layer, self.rng)
        self.head.add_node(self.rng)
        self._extend_slots()

    def _extend_slots(self) -> None:
        self.gen_stats.add_node()
        self.disc_stats.add_node()
        self.vel_w = np.concatenate([self.vel_w, np.zeros((self.n_in, 1))], axis=1)
        self.vel_b = np.concatenate([self.vel_b, [0.0]])

    def _prune(self, index: int) -> None:
        dae.prune_node(self.layer, index)
        self.head.remove_node(index)
        self.gen_stats.remove_node(index)
        self.disc_stats.remove_node(index)
        self.vel_w = np.delete(self.vel_w, index, axis=1)
        self.vel_b = np.delete(self.vel_b, index)

    # -------------------------------------------------------------- train steps

    def generative_step(self, x: np.ndarray) -> StepReport:
        """One unsupervised update: corrupt, reconstruct, evolve, descend."""
        cfg = self.config
        x = np.asarray(x, dtype=np.float64)
        x_tilde = dae.mask_input(x, self.mask)
        a = x_tilde @ self.layer.w + self.layer.b
        y = sigmoid(a)
        z = sigmoid(y @ self.layer.w.T + self.layer.c)
        residual = x - z

        self.gen_stats.update(a)
        snap = ns_snapshot_generative(self.layer, self.gen_stats, x)

        self.gen_bias.update(snap.bias2)
        grew = cfg.enable_grow and should_grow(self.gen_bias, snap.bias2)
        if grew:
            self._grow_generative(residual)
            self.gen_bias.reset_min(cfg.reset_mode)

        self.gen_var.update(snap.variance)
        pruned = cfg.enable_prune and should_prune(
            self.gen_var, snap.variance, grew, self.width
        )
        if pruned:
            self._prune(weakest_node(hidden_significance(self.gen_stats)))
            self.gen_var.reset_min(cfg.reset_mode)

        if grew or pruned:
            y = sigmoid(x_tilde @ self.layer.w + self.layer.b)
            z = None  # force decode against the edited layer
        loss, dw, db, dc = dae.generative_gradients(self.layer, x, x_tilde, y=y, z=z)
        if not np.isfinite(loss):
            raise NumericError(f"non-finite generative loss {loss!r}")
        dae.sgd_step_generative(self.layer, dw, db, dc, cfg.lr_generative)
        return StepReport(grew, pruned, loss, self.width)

    def discriminative_step(self, x: np.ndarray, label: int) -> StepReport:
        """One supervised update: predict, evolve from prediction bias/variance,
        then momentum-descend encoder and head through the cross-entropy loss."""
        cfg = self.config
        x = np.asarray(x, dtype=np.float64)
        if not 0 <= label < self.n_classes:
            raise ShapeError(f"label {label} out of range [0, {self.n_classes})")
        onehot = np.zeros(self.n_classes)
        onehot[label] = 1.0

        a = x @ self.layer.w + self.layer.b
        h = sigmoid(a)
        probs = softmax_row(h @ self.head.theta + self.head.eta)

        self.disc_stats.update(a)
        snap = ns_snapshot_discriminative(
            self.head.theta, self.head.eta, self.disc_stats, onehot
        )

        self.disc_bias.update(snap.bias2)
        grew = cfg.enable_grow and should_grow(self.disc_bias, snap.bias2)
        if grew:
            self._grow_discriminative()
            self.disc_bias.reset_min(cfg.reset_mode)

        self.disc_var.update(snap.variance)
        pruned = cfg.enable_prune and should_prune(
            self.disc_var, snap.variance, grew, self.width
        )
        if pruned:
            self._prune(weakest_node(hidden_significance(self.disc_stats)))
            self.disc_var.reset_min(cfg.reset_mode)

        if grew or pruned:
            h = sigmoid(x @ self.layer.w + self.layer.b)
            probs = softmax_row(h @ self.head.theta + self.head.eta)

        loss = -float(np.log(max(probs[label], 1e-300)))
        if not np.isfinite(loss):
            raise NumericError(f"non-finite discriminative loss {loss!r}")

        # fused softmax cross-entropy residual
        dlogits = probs - onehot
        dtheta = np.outer(h, dlogits)
        deta = dlogits
        dh = self.head.theta @ dlogits
        da = dh * h * (1.0 - h)
        dw = np.outer(x, da)
        db = da

        mom, lr = cfg.momentum, cfg.lr_discriminative
        head = self.head
        head.vel_theta = mom * head.vel_theta + dtheta
        head.vel_eta = mom * head.vel_eta + deta
        self.vel_w = mom * self.vel_w + dw
        self.vel_b = mom * self.vel_b + db
        head.theta -= lr * head.vel_theta
        head.eta -= lr * head.vel_eta
        self.layer.w -= lr * self.vel_w
        self.layer.b -= lr * self.vel_b
        return StepReport(grew, pruned, loss, self.width)

    # -------------------------------------------------------------- batch level

    def train_batch(self, batch) -> BatchReport:
        """Single-epoch pass: generative phase over every row, then the
        discriminative phase over the rows whose labels are revealed."""
        feats = np.asarray(batch.features, dtype=np.float64)
        grows = prunes = 0
        gen_losses = []
        if self.config.enable_generative:
            for t in range(feats.shape[0]):
                try:
                    rep = self.generative_step(feats[t])
                except NumericError as err:
                    raise NumericError(f"sample {t}: {err}") from err
                grows += rep.grew
                prunes += rep.pruned
                gen_losses.append(rep.loss)
        disc_losses = []
        labels = np.asarray(batch.labels)
        mask = np.asarray(batch.labeled_mask, dtype=bool)
        for t in np.flatnonzero(mask):
            try:
                rep = self.discriminative_step(feats[t], int(labels[t]))
            except NumericError as err:
                raise NumericError(f"sample {t}: {err}") from err
            grows += rep.grew
            prunes += rep.pruned
            disc_losses.append(rep.loss)
        return BatchReport(
            generative_loss=float(np.mean(gen_losses)) if gen_losses else float("nan"),
            discriminative_loss=float(np.mean(disc_losses)) if disc_losses else float("nan"),
            grow_events=grows,
            prune_events=prunes,
            width_after=self.width,
            generative_steps=len(gen_losses),
            discriminative_steps=len(disc_losses),
        )
