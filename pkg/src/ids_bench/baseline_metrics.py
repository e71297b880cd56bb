"""Comparison baselines: FID, block-averaged unbiased KID, Pearson correlation."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DomainError, NumericalError
from .feature_store import FeatureMatrix
from .ids_metrics import MetricResult
from .rng import generator_from, split_seed

__all__ = ["GaussianStats", "gaussian_stats", "fid", "kid", "pearson"]

# Eigenvalues this far below zero (relative to the spectrum scale) are treated
# as numerical noise and clamped; anything worse is an error.
_EIG_REL_TOL = 1e-8
_FID_NEG_TOL = 1e-6


@dataclass(frozen=True)
class GaussianStats:
    """Sample mean and covariance summarizing one feature distribution."""

    mean: np.ndarray  # (d,)
    cov: np.ndarray  # (d, d), symmetric
    n: int

    def __post_init__(self):
        if self.n < 2:
            raise DomainError("need at least 2 samples for covariance")
        if self.mean.ndim != 1 or self.cov.shape != (self.mean.size, self.mean.size):
            raise DomainError("mean/cov shapes inconsistent")
        if not np.allclose(self.cov, self.cov.T, atol=1e-9):
            raise DomainError("covariance is not symmetric")

    @property
    def d(self) -> int:
        return self.mean.size


def gaussian_stats(feats: FeatureMatrix) -> GaussianStats:
    """Sample mean and 1/(n-1)-normalized covariance, explicitly symmetrized."""
    if feats.n < 2:
        raise DomainError(f"need n >= 2 to estimate covariance, got {feats.n}")
    x = feats.data.astype(np.float64)
    mean = x.mean(axis=0)
    xc = x - mean
    cov = xc.T @ xc / (feats.n - 1)
    cov = (cov + cov.T) / 2.0
    return GaussianStats(mean=mean, cov=cov, n=feats.n)


def _clamped_eigvals(vals: np.ndarray) -> np.ndarray:
    """Clamp slightly negative eigenvalues to zero; reject substantial ones."""
    tol = _EIG_REL_TOL * max(1.0, float(np.abs(vals).max()))
    smallest = float(vals.min())
    if smallest < -tol:
        raise NumericalError(
            f"matrix has substantially negative eigenvalue {smallest:.3e} (tolerance {-tol:.3e})"
        )
    return np.clip(vals, 0.0, None)


def fid(a: GaussianStats, b: GaussianStats) -> float:
    """Frechet distance between the two Gaussians.

    ||mu_a - mu_b||^2 + Tr(S_a + S_b - 2 (S_a S_b)^(1/2)), where the trace of
    the product square root is computed spectrally as
    Tr(sqrt(S_a^(1/2) S_b S_a^(1/2))): both eigendecompositions are of
    symmetric matrices, with slightly negative eigenvalues clamped to zero and
    substantially negative ones rejected.
    """
    if a.d != b.d:
        raise DomainError(f"dimension mismatch: {a.d} vs {b.d}")
    vals, vecs = np.linalg.eigh(a.cov)
    root_a = (vecs * np.sqrt(_clamped_eigvals(vals))) @ vecs.T
    inner = root_a @ b.cov @ root_a
    inner = (inner + inner.T) / 2.0
    tr_sqrt = float(np.sqrt(_clamped_eigvals(np.linalg.eigvalsh(inner))).sum())

    diff = a.mean - b.mean
    value = float(diff @ diff) + float(np.trace(a.cov)) + float(np.trace(b.cov)) - 2.0 * tr_sqrt
    if value < 0.0:
        if value < -_FID_NEG_TOL:
            raise NumericalError(f"FID evaluated to {value:.3e}, below the -{_FID_NEG_TOL} floor")
        value = 0.0
    return value


def _poly3_kernel(x: np.ndarray, y: np.ndarray) -> np.ndarray:
    # degree-3 polynomial kernel with 1/d scaling
    d = x.shape[1]
    return (x @ y.T / d + 1.0) ** 3


def _mmd2_unbiased(x: np.ndarray, y: np.ndarray) -> float:
    m = x.shape[0]
    kxx = _poly3_kernel(x, x)
    kyy = _poly3_kernel(y, y)
    kxy = _poly3_kernel(x, y)
    sum_xx = float(kxx.sum() - np.trace(kxx))
    sum_yy = float(kyy.sum() - np.trace(kyy))
    return sum_xx / (m * (m - 1)) + sum_yy / (m * (m - 1)) - 2.0 * float(kxy.mean())


def kid(
    real: FeatureMatrix, fake: FeatureMatrix, block_size: int = 1000, seed: int = 0
) -> MetricResult:
    """Block-averaged unbiased squared-MMD estimate, single run.

    Rows of each side are shuffled with seeds derived from `seed`, split into
    floor(n/m) disjoint blocks of m = min(block_size, n) rows (leftovers are
    discarded so every block estimate is identically distributed), and the
    per-block unbiased estimates are averaged. Individual estimates can be
    negative; that is the price of unbiasedness.
    """
    if real.d != fake.d:
        raise DomainError(f"feature dims differ: {real.d} vs {fake.d}")
    if real.n != fake.n:
        raise DomainError(f"class sizes differ: {real.n} vs {fake.n}")
    if real.n < 2:
        raise DomainError("need at least 2 samples per side")
    if block_size < 2:
        raise DomainError("block_size must be >= 2")

    n = real.n
    m = min(block_size, n)
    n_blocks = n // m
    perm_real = generator_from(split_seed(seed, "kid-shuffle-real")).permutation(n)
    perm_fake = generator_from(split_seed(seed, "kid-shuffle-fake")).permutation(n)
    x = real.data.astype(np.float64)[perm_real]
    y = fake.data.astype(np.float64)[perm_fake]

    block_values = [
        _mmd2_unbiased(x[b * m : (b + 1) * m], y[b * m : (b + 1) * m]) for b in range(n_blocks)
    ]
    value = float(np.mean(block_values))
    config = {
        "metric": "kid",
        "n": n,
        "d": real.d,
        "seed": seed,
        "block_size": block_size,
        "block_rows": m,
        "n_blocks": n_blocks,
        "kernel": "(x.y/d + 1)^3",
        "block_values": [float(v) for v in block_values],
    }
    return MetricResult.single_run("kid", value, n, config)


def pearson(xs, ys) -> float:
    """Sample Pearson correlation of two equal-length sequences."""
    x = np.asarray(xs, dtype=np.float64)
    y = np.asarray(ys, dtype=np.float64)
    if x.ndim != 1 or y.ndim != 1 or x.size != y.size:
        raise DomainError("inputs must be equal-length 1-D sequences")
    if x.size < 2:
        raise DomainError("need at least 2 points")
    xc = x - x.mean()
    yc = y - y.mean()
    sx = float(xc @ xc)
    sy = float(yc @ yc)
    if sx == 0.0 or sy == 0.0:
        raise DomainError("zero variance input")
    r = float(xc @ yc) / np.sqrt(sx * sy)
    return float(min(1.0, max(-1.0, r)))
