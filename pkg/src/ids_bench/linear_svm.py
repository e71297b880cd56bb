"""Soft-margin linear SVM trained by dual coordinate descent.

Solves the hinge-loss dual

    min_{0 <= a_i <= C}  1/2 a' Q a - 1' a,    Q_ij = y_i y_j x_i . x_j

over bias-augmented features (every x gets a trailing constant-1 coordinate,
so the bias is just the last weight and Q_ii >= 1 always). One epoch visits
every coordinate once in an order reshuffled by the seeded PRNG; a coordinate
step minimizes the dual exactly along that coordinate, so the objective never
increases. Training stops when the largest projected-gradient violation seen
during an epoch drops to `tol`, or after `max_epochs` epochs (not an error:
the metric is defined on whatever separator training produced, and the model
records converged=False).
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from numba import njit

from .errors import DomainError
from .feature_store import FeatureMatrix
from .rng import generator_from

__all__ = ["SvmConfig", "SvmModel", "LabeledFeatures", "fit_svm", "decision_values"]


@dataclass(frozen=True)
class SvmConfig:
    """Training hyperparameters; defaults are common linear-SVM choices."""

    c: float = 1.0
    tol: float = 1e-4
    max_epochs: int = 1000

    def __post_init__(self):
        if not (self.c > 0 and np.isfinite(self.c)):
            raise DomainError(f"c must be a positive real, got {self.c}")
        if not (self.tol > 0 and np.isfinite(self.tol)):
            raise DomainError(f"tol must be a positive real, got {self.tol}")
        if self.max_epochs < 1:
            raise DomainError("max_epochs must be >= 1")


@dataclass(frozen=True)
class LabeledFeatures:
    """Features plus +1 (real) / -1 (fake) labels; both classes required."""

    features: FeatureMatrix
    labels: np.ndarray

    def __post_init__(self):
        labels = np.ascontiguousarray(self.labels, dtype=np.float64)
        if labels.shape != (self.features.n,):
            raise DomainError(
                f"labels shape {labels.shape} does not match n={self.features.n}"
            )
        if not np.isin(labels, (-1.0, 1.0)).all():
            raise DomainError("labels must be +1 or -1")
        if not ((labels == 1.0).any() and (labels == -1.0).any()):
            raise DomainError("training data must contain both classes")
        labels.flags.writeable = False
        object.__setattr__(self, "labels", labels)


@dataclass(frozen=True)
class SvmModel:
    weights: np.ndarray  # (d,) float64
    bias: float
    c_param: float
    epochs_run: int
    converged: bool
    dual_objective: float
    objective_history: np.ndarray  # dual objective after each epoch
    alpha: np.ndarray  # final dual variables, kept for audit

    @property
    def d(self) -> int:
        return self.weights.shape[0]

    def to_dict(self) -> dict:
        return {
            "weights": self.weights.tolist(),
            "bias": self.bias,
            "c_param": self.c_param,
            "epochs_run": self.epochs_run,
            "converged": self.converged,
            "dual_objective": self.dual_objective,
        }

    def dump_json(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_dict()) + "\n")


@njit(cache=True)
def _dcd_epoch(x, y, qdiag, alpha, w, c, order):  # pragma: no cover - jitted
    max_violation = 0.0
    n, d = x.shape
    for t in range(n):
        i = order[t]
        g = 0.0
        for j in range(d):
            g += w[j] * x[i, j]
        g = g * y[i] - 1.0
        a = alpha[i]
        if a <= 0.0:
            pg = g if g < 0.0 else 0.0
        elif a >= c:
            pg = g if g > 0.0 else 0.0
        else:
            pg = g
        apg = -pg if pg < 0.0 else pg
        if apg > max_violation:
            max_violation = apg
        if apg > 1e-12:
            na = a - g / qdiag[i]
            if na < 0.0:
                na = 0.0
            elif na > c:
                na = c
            delta = (na - a) * y[i]
            if delta != 0.0:
                for j in range(d):
                    w[j] += delta * x[i, j]
                alpha[i] = na
    return max_violation


def fit_svm(
    data: LabeledFeatures,
    c_param: float = 1.0,
    tol: float = 1e-4,
    max_epochs: int = 1000,
    seed: int = 0,
    debug: bool = False,
) -> SvmModel:
    """Train on the given samples; deterministic in (data, c, tol, seed).

    With debug=True the dual box constraints 0 <= alpha_i <= C are asserted
    after every epoch.
    """
    cfg = SvmConfig(c_param, tol, max_epochs)
    x = data.features.data.astype(np.float64)
    n, d = x.shape
    xa = np.empty((n, d + 1), dtype=np.float64)
    xa[:, :d] = x
    xa[:, d] = 1.0  # bias augmentation
    y = data.labels
    qdiag = np.einsum("ij,ij->i", xa, xa)

    alpha = np.zeros(n, dtype=np.float64)
    w = np.zeros(d + 1, dtype=np.float64)
    rng = generator_from(seed)
    history = []
    converged = False
    epochs_run = 0
    for _ in range(cfg.max_epochs):
        order = rng.permutation(n)
        violation = _dcd_epoch(xa, y, qdiag, alpha, w, cfg.c, order)
        epochs_run += 1
        history.append(0.5 * float(w @ w) - float(alpha.sum()))
        if debug:
            assert alpha.min() >= 0.0 and alpha.max() <= cfg.c, "alpha left [0, C]"
        if violation <= cfg.tol:
            converged = True
            break

    hist = np.array(history)
    hist.flags.writeable = False
    weights = w[:d].copy()
    weights.flags.writeable = False
    alpha.flags.writeable = False
    return SvmModel(
        weights=weights,
        bias=float(w[d]),
        c_param=cfg.c,
        epochs_run=epochs_run,
        converged=converged,
        dual_objective=float(hist[-1]),
        objective_history=hist,
        alpha=alpha,
    )


def decision_values(model: SvmModel, feats: FeatureMatrix) -> np.ndarray:
    """Affine scores w . x_i + b per row; positive means classified real."""
    if feats.d != model.d:
        raise DomainError(f"feature dim {feats.d} does not match model dim {model.d}")
    return feats.data.astype(np.float64) @ model.weights + model.bias
