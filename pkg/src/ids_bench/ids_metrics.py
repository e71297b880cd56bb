"""Paired and unpaired discriminative scores.

Both scores fit a linear SVM on the union of the given real and fake feature
rows and evaluate the decision function on those same rows: the point is the
achieved linear separability of exactly these samples, not generalization, so
there is deliberately no train/test split.

The paired score is the fraction of pairs whose fake member gets a strictly
larger decision value than its real counterpart. The unpaired score is the
mean of the two class misclassification rates: real rows count as errors iff
f < 0, fake rows iff f > 0 (boundary values f = 0 are errors for neither).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .errors import DomainError
from .feature_store import FeatureMatrix, PairedFeatureSet
from .linear_svm import LabeledFeatures, SvmConfig, SvmModel, decision_values, fit_svm
from .rng import split_seed

__all__ = ["MetricResult", "p_ids", "u_ids", "run_repeated"]


@dataclass(frozen=True)
class MetricResult:
    """A metric value with its per-run provenance.

    For a single run, per_run_values holds just that value and std is 0. The
    std over runs is the population standard deviation, matching the mean+-std
    reporting convention used throughout.
    """

    name: str
    value: float
    per_run_values: tuple[float, ...]
    mean: float
    std: float
    n_samples: int
    config: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "value": self.value,
            "per_run_values": list(self.per_run_values),
            "mean": self.mean,
            "std": self.std,
            "n_samples": self.n_samples,
            "config": self.config,
        }

    @staticmethod
    def single_run(name: str, value: float, n_samples: int, config: dict) -> "MetricResult":
        return MetricResult(
            name=name,
            value=value,
            per_run_values=(value,),
            mean=value,
            std=0.0,
            n_samples=n_samples,
            config=config,
        )


def _fit_on_union(
    real: FeatureMatrix, fake: FeatureMatrix, svm_config: SvmConfig, seed: int
) -> tuple[SvmModel, np.ndarray, np.ndarray]:
    """Fit on real rows (label +1) stacked above fake rows (label -1); return
    the model and the decision values of the real and fake rows."""
    stacked = FeatureMatrix(np.concatenate([real.data, fake.data], axis=0), "union")
    labels = np.concatenate([np.ones(real.n), -np.ones(fake.n)])
    model = fit_svm(
        LabeledFeatures(stacked, labels),
        c_param=svm_config.c,
        tol=svm_config.tol,
        max_epochs=svm_config.max_epochs,
        seed=seed,
    )
    values = decision_values(model, stacked)
    return model, values[: real.n], values[real.n :]


def _base_config(kind: str, real: FeatureMatrix, svm_config: SvmConfig, seed: int, model: SvmModel) -> dict:
    return {
        "metric": kind,
        "n": real.n,
        "d": real.d,
        "seed": seed,
        "svm_c": svm_config.c,
        "svm_tol": svm_config.tol,
        "svm_max_epochs": svm_config.max_epochs,
        "svm_converged": model.converged,
        "svm_epochs_run": model.epochs_run,
    }


def p_ids(
    pairs: PairedFeatureSet, svm_config: SvmConfig | None = None, seed: int = 0
) -> MetricResult:
    """Paired score: Pr[f(fake_i) > f(real_i)] over the pairs, single run.

    Ties contribute 0 (strict inequality); identical real/fake inputs
    therefore score 0, which reports as-is rather than being special-cased.
    """
    svm_config = svm_config or SvmConfig()
    model, f_real, f_fake = _fit_on_union(pairs.real, pairs.fake, svm_config, seed)
    value = float(np.mean(f_fake > f_real))
    return MetricResult.single_run(
        "p_ids", value, pairs.n, _base_config("p_ids", pairs.real, svm_config, seed, model)
    )


def u_ids(
    real: FeatureMatrix,
    fake: FeatureMatrix,
    svm_config: SvmConfig | None = None,
    seed: int = 0,
    allow_unequal: bool = False,
) -> MetricResult:
    """Unpaired score: mean of the two class misclassification rates, single run.

    The protocol assumes equally many real and fake samples; pass
    allow_unequal=True for exploratory use, which watermarks the config.
    """
    if real.d != fake.d:
        raise DomainError(f"feature dims differ: {real.d} vs {fake.d}")
    if real.n != fake.n and not allow_unequal:
        raise DomainError(
            f"class sizes differ ({real.n} real vs {fake.n} fake); "
            "pass allow_unequal=True to override"
        )
    svm_config = svm_config or SvmConfig()
    model, f_real, f_fake = _fit_on_union(real, fake, svm_config, seed)
    err_real = float(np.mean(f_real < 0.0))
    err_fake = float(np.mean(f_fake > 0.0))
    value = 0.5 * err_real + 0.5 * err_fake
    config = _base_config("u_ids", real, svm_config, seed, model)
    config["err_real"] = err_real
    config["err_fake"] = err_fake
    if real.n != fake.n:
        config["unequal_class_sizes"] = True
        config["n_fake"] = fake.n
    return MetricResult.single_run("u_ids", value, real.n, config)


def run_repeated(
    metric_fn: Callable[[int], MetricResult], runs: int, base_seed: int
) -> MetricResult:
    """Aggregate `runs` single runs of a seeded metric into mean and std.

    Run k receives the derived seed split(base_seed, "run", k), so shrinking
    or growing `runs` never changes the seeds of the runs that remain.
    """
    if runs < 1:
        raise DomainError("runs must be >= 1")
    results = [metric_fn(split_seed(base_seed, "run", k)) for k in range(runs)]
    values = np.array([r.value for r in results], dtype=np.float64)
    config = dict(results[0].config)
    config.update(
        {
            "runs": runs,
            "base_seed": base_seed,
            "run_seeds": [split_seed(base_seed, "run", k) for k in range(runs)],
            "run_configs": [r.config for r in results],
        }
    )
    return MetricResult(
        name=results[0].name,
        value=float(values.mean()),
        per_run_values=tuple(float(v) for v in values),
        mean=float(values.mean()),
        std=float(values.std()),
        n_samples=results[0].n_samples,
        config=config,
    )
