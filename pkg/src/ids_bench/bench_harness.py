"""Experiment orchestration: convergence, subtle-difference, and bucket-table
studies plus the metric-vs-human correlation analysis.

Every report embeds its full experiment spec (inputs, seeds, hyperparameters),
and :func:`rerun_report` re-executes a report from nothing but that embedded
spec; re-runs must reproduce every number bit-exactly. Cell seeds derive from
split(base, group, param, run), so results never depend on iteration order
and shrinking `runs` keeps the remaining runs' seeds.
"""

from __future__ import annotations

import csv
import json
import tempfile
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

from . import __version__ as _version
from .baseline_metrics import GaussianStats, fid, gaussian_stats, kid, pearson
from .errors import ConfigError, DomainError, IoError
from .feature_store import (
    FeatureMatrix,
    PairedFeatureSet,
    PluginExtractor,
    ToyEmbedder,
    extract_corpus,
    list_corpus,
    read_features,
)
from .ids_metrics import MetricResult, p_ids, run_repeated, u_ids
from .linear_svm import SvmConfig
from .manipulations import RasterImage, load_png, noisy_pixels, save_png
from .rng import generator_from, split_seed

BUCKET_LABELS = ("(0.0, 0.2)", "(0.2, 0.4)", "(0.4, 0.6)", "(0.6, 0.8)", "(0.8, 1.0)")
BUCKET_BOUNDS = ((0.0, 0.2), (0.2, 0.4), (0.4, 0.6), (0.6, 0.8), (0.8, 1.0))

_KINDS = ("convergence", "subtle", "bucket-table", "correlation")

__all__ = [
    "BUCKET_LABELS",
    "BUCKET_BOUNDS",
    "ExperimentSpec",
    "convergence_study",
    "subtle_study",
    "bucket_table",
    "correlation_analysis",
    "run_experiment",
    "rerun_report",
    "write_report_json",
    "load_report_json",
    "write_report_csv",
    "read_report_csv",
]


@dataclass
class ExperimentSpec:
    """Everything needed to run (and later re-run) one experiment."""

    kind: str
    runs: int = 5
    seed: int = 0
    metrics: tuple[str, ...] = ()
    grid: tuple = ()
    inputs: dict = field(default_factory=dict)
    svm: dict = field(default_factory=lambda: {"c": 1.0, "tol": 1e-4, "max_epochs": 1000})
    options: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.kind not in _KINDS:
            raise ConfigError(f"unknown experiment kind {self.kind!r}")
        if self.runs < 1:
            raise ConfigError("runs must be >= 1")
        if self.kind != "correlation" and not self.grid:
            raise ConfigError("experiment grid must be non-empty")
        self.metrics = tuple(self.metrics)
        self.grid = tuple(self.grid)

    def validate_files(self) -> None:
        """Check that every referenced path exists before launching."""
        for key, value in self.inputs.items():
            paths = value.values() if isinstance(value, dict) else [value]
            for p in paths:
                if isinstance(p, (str, Path)) and not Path(p).exists():
                    raise ConfigError(f"input {key}: no such path {p}")

    def svm_config(self) -> SvmConfig:
        return SvmConfig(self.svm["c"], self.svm["tol"], self.svm["max_epochs"])

    def to_dict(self) -> dict:
        return {
            "kind": self.kind,
            "runs": self.runs,
            "seed": self.seed,
            "metrics": list(self.metrics),
            "grid": list(self.grid),
            "inputs": self.inputs,
            "svm": self.svm,
            "options": self.options,
        }

    @staticmethod
    def from_dict(d: dict) -> "ExperimentSpec":
        return ExperimentSpec(
            kind=d["kind"],
            runs=d["runs"],
            seed=d["seed"],
            metrics=tuple(d["metrics"]),
            grid=tuple(d["grid"]),
            inputs=d["inputs"],
            svm=d["svm"],
            options=d["options"],
        )


def _aggregate(values: Sequence[float]) -> tuple[float, float]:
    arr = np.asarray(values, dtype=np.float64)
    return float(arr.mean()), float(arr.std())


def _cell(group, param, metric, values) -> dict:
    mean, std = _aggregate(values)
    return {
        "group": str(group),
        "param": param,
        "metric": metric,
        "mean": mean,
        "std": std,
        "values": [float(v) for v in values],
    }


def _report(kind: str, spec_dict: dict, cells: list[dict], **extra) -> dict:
    report = {"kind": kind, "version": _version, "spec": spec_dict, "cells": cells}
    report.update(extra)
    return report


# ---------------------------------------------------------------------------
# Convergence study (robustness to sampling size)


def convergence_study(
    real: FeatureMatrix,
    fake_variants: Mapping[str, FeatureMatrix],
    sizes: Sequence[int],
    runs: int = 5,
    seed: int = 0,
    svm_config: SvmConfig | None = None,
    metrics: Sequence[str] = ("p_ids", "u_ids", "fid"),
    fid_reference: GaussianStats | None = None,
    block_size: int = 1000,
    spec_dict: dict | None = None,
) -> dict:
    """Per (variant, size, run): subsample rows (same indices both sides, so
    pairing survives) and compute the requested metrics; report mean and std
    per size.

    FID uses the subsampled real side unless fixed reference statistics are
    supplied, mirroring the measured-on-full-data reference convention; the
    mode is recorded in the report.
    """
    svm_config = svm_config or SvmConfig()
    sizes = list(sizes)
    if not sizes or sorted(sizes) != sizes:
        raise DomainError("sizes must be non-empty and ascending")
    if not fake_variants:
        raise DomainError("need at least one fake variant")
    for label, variant in fake_variants.items():
        if variant.n != real.n or variant.d != real.d:
            raise DomainError(f"variant {label!r} shape does not match the real side")
    if sizes[-1] > real.n:
        raise DomainError(f"size {sizes[-1]} exceeds available n={real.n}")
    if runs < 1:
        raise DomainError("runs must be >= 1")

    cells = []
    for label in sorted(fake_variants):
        fake = fake_variants[label]
        for size in sizes:
            per_metric: dict[str, list[float]] = {m: [] for m in metrics}
            for run in range(runs):
                cell_seed = split_seed(seed, label, size, run)
                idx = generator_from(split_seed(cell_seed, "subsample")).choice(
                    real.n, size=size, replace=False
                )
                real_sub = real.rows(idx)
                fake_sub = fake.rows(idx)
                for metric in metrics:
                    if metric == "p_ids":
                        value = p_ids(
                            PairedFeatureSet(real_sub, fake_sub),
                            svm_config,
                            split_seed(cell_seed, "pids"),
                        ).value
                    elif metric == "u_ids":
                        value = u_ids(
                            real_sub, fake_sub, svm_config, split_seed(cell_seed, "uids")
                        ).value
                    elif metric == "fid":
                        ref = fid_reference or gaussian_stats(real_sub)
                        value = fid(ref, gaussian_stats(fake_sub))
                    elif metric == "kid":
                        value = kid(
                            real_sub, fake_sub, block_size, split_seed(cell_seed, "kid")
                        ).value
                    else:
                        raise ConfigError(f"unknown metric {metric!r}")
                    per_metric[metric].append(value)
            for metric in metrics:
                cells.append(_cell(label, size, metric, per_metric[metric]))

    spec_dict = spec_dict or {
        "kind": "convergence",
        "runs": runs,
        "seed": seed,
        "metrics": list(metrics),
        "grid": sizes,
        "inputs": {},
        "svm": {"c": svm_config.c, "tol": svm_config.tol, "max_epochs": svm_config.max_epochs},
        "options": {
            "block_size": block_size,
            "fid_reference": "fixed" if fid_reference is not None else "subsample",
        },
    }
    return _report("convergence", spec_dict, cells)


# ---------------------------------------------------------------------------
# Subtle-difference study


def _extract_images(extractor, images: Sequence[RasterImage]) -> FeatureMatrix:
    if hasattr(extractor, "embed"):
        rows = np.stack([extractor.embed(img) for img in images])
        return FeatureMatrix(rows, extractor.name)
    with tempfile.TemporaryDirectory(prefix="ids-subtle-") as tmp:
        paths = []
        for i, img in enumerate(images):
            p = Path(tmp) / f"{i:06d}.png"
            save_png(img, p)
            paths.append(p)
        return FeatureMatrix(extractor.extract_paths(paths), extractor.name)


def subtle_study(
    images: Sequence[RasterImage],
    pixel_counts: Sequence[int],
    extractor,
    runs: int = 5,
    seed: int = 0,
    svm_config: SvmConfig | None = None,
    metrics: Sequence[str] = ("p_ids", "u_ids", "fid", "kid"),
    block_size: int = 1000,
    spec_dict: dict | None = None,
) -> dict:
    """Corrupt the corpus with n interpolated noisy pixels for each n in
    pixel_counts, re-extract features, and score against the clean corpus.

    The manipulation preserves image correspondence, so the paired score
    applies. Each run redraws the noisy positions (and the SVM shuffle) from
    per-cell seeds.
    """
    svm_config = svm_config or SvmConfig()
    if not images:
        raise DomainError("corpus is empty")
    counts = list(pixel_counts)
    if not counts or sorted(counts) != counts:
        raise DomainError("pixel_counts must be non-empty and ascending")
    min_pixels = min(img.width * img.height for img in images)
    if counts[-1] >= min_pixels:
        raise DomainError(
            f"pixel count {counts[-1]} too large for the smallest image ({min_pixels} px)"
        )
    if runs < 1:
        raise DomainError("runs must be >= 1")

    real = _extract_images(extractor, images)
    cells = []
    for count in counts:
        per_metric: dict[str, list[float]] = {m: [] for m in metrics}
        for run in range(runs):
            cell_seed = split_seed(seed, "noisy", count, run)
            manipulated = [
                noisy_pixels(img, count, split_seed(cell_seed, "img", i))
                for i, img in enumerate(images)
            ]
            fake = _extract_images(extractor, manipulated)
            for metric in metrics:
                if metric == "p_ids":
                    value = p_ids(
                        PairedFeatureSet(real, fake), svm_config, split_seed(cell_seed, "pids")
                    ).value
                elif metric == "u_ids":
                    value = u_ids(real, fake, svm_config, split_seed(cell_seed, "uids")).value
                elif metric == "fid":
                    value = fid(gaussian_stats(real), gaussian_stats(fake))
                elif metric == "kid":
                    value = kid(real, fake, block_size, split_seed(cell_seed, "kid")).value
                else:
                    raise ConfigError(f"unknown metric {metric!r}")
                per_metric[metric].append(value)
        for metric in metrics:
            cells.append(_cell("noisy", count, metric, per_metric[metric]))

    spec_dict = spec_dict or {
        "kind": "subtle",
        "runs": runs,
        "seed": seed,
        "metrics": list(metrics),
        "grid": counts,
        "inputs": {},
        "svm": {"c": svm_config.c, "tol": svm_config.tol, "max_epochs": svm_config.max_epochs},
        "options": {"block_size": block_size},
    }
    return _report("subtle", spec_dict, cells)


# ---------------------------------------------------------------------------
# Bucket table


def bucket_table(
    real_images,
    fake_dirs: Mapping[str, str],
    extractor,
    runs: int = 5,
    seed: int = 0,
    svm_config: SvmConfig | None = None,
    buckets: Sequence[str] | None = None,
    spec_dict: dict | None = None,
) -> dict:
    """Score each masked-ratio bucket's fake corpus against the real corpus.

    `real_images` is a single directory shared by all buckets or a mapping
    bucket -> directory. All five ratio buckets must be present unless an
    explicit subset is requested.
    """
    svm_config = svm_config or SvmConfig()
    requested = tuple(buckets) if buckets else BUCKET_LABELS
    for b in requested:
        if b not in BUCKET_LABELS:
            raise ConfigError(f"unknown bucket label {b!r}; expected one of {BUCKET_LABELS}")
        if b not in fake_dirs:
            raise ConfigError(f"missing fake directory for bucket {b}")
    if runs < 1:
        raise DomainError("runs must be >= 1")

    real_cache: dict[str, FeatureMatrix] = {}

    def real_for(bucket: str) -> FeatureMatrix:
        d = real_images[bucket] if isinstance(real_images, Mapping) else real_images
        key = str(d)
        if key not in real_cache:
            real_cache[key] = extract_corpus(extractor, d)
        return real_cache[key]

    cells = []
    rows: dict[str, dict[str, MetricResult]] = {}
    for bucket in (b for b in BUCKET_LABELS if b in requested):
        real = real_for(bucket)
        fake = extract_corpus(extractor, fake_dirs[bucket])
        if fake.n != real.n:
            raise ConfigError(
                f"bucket {bucket}: fake corpus has {fake.n} images, real has {real.n}"
            )
        pair = PairedFeatureSet(real, fake)
        results = {
            "p_ids": run_repeated(
                lambda s: p_ids(pair, svm_config, s), runs, split_seed(seed, bucket, "pids")
            ),
            "u_ids": run_repeated(
                lambda s: u_ids(real, fake, svm_config, s), runs, split_seed(seed, bucket, "uids")
            ),
            "fid": run_repeated(
                lambda s: MetricResult.single_run(
                    "fid", fid(gaussian_stats(real), gaussian_stats(fake)), real.n, {"seed": s}
                ),
                runs,
                split_seed(seed, bucket, "fid"),
            ),
        }
        rows[bucket] = results
        for metric, result in results.items():
            cells.append(_cell(bucket, None, metric, result.per_run_values))

    spec_dict = spec_dict or {
        "kind": "bucket-table",
        "runs": runs,
        "seed": seed,
        "metrics": ["p_ids", "u_ids", "fid"],
        "grid": list(requested),
        "inputs": {},
        "svm": {"c": svm_config.c, "tol": svm_config.tol, "max_epochs": svm_config.max_epochs},
        "options": {},
    }
    return _report("bucket-table", spec_dict, cells, rows={
        bucket: {metric: result.to_dict() for metric, result in results.items()}
        for bucket, results in rows.items()
    })


# ---------------------------------------------------------------------------
# Correlation analysis


def correlation_analysis(metric_points, human_points: Sequence) -> dict:
    """Join labeled metric values with labeled human preference rates and
    compute the Pearson correlation per metric.

    `metric_points` is a mapping metric-name -> [(label, value), ...] (a bare
    list is treated as one unnamed metric). Label sets must match exactly.
    """
    if not isinstance(metric_points, Mapping):
        metric_points = {"metric": list(metric_points)}
    human = {str(label): float(rate) for label, rate in human_points}
    if len(human) != len(list(human_points)):
        raise DomainError("duplicate labels in human points")
    if len(human) < 2:
        raise DomainError("need at least 2 points")

    labels = sorted(human)
    table = [{"label": label, "human": human[label]} for label in labels]
    pearson_by_metric = {}
    for name, points in metric_points.items():
        values = {str(label): float(v) for label, v in points}
        if set(values) != set(human):
            raise DomainError(
                f"label mismatch for metric {name!r}: {sorted(set(values) ^ set(human))}"
            )
        pearson_by_metric[name] = pearson(
            [values[label] for label in labels], [human[label] for label in labels]
        )
        for row in table:
            row[name] = values[row["label"]]
    return {"pearson": pearson_by_metric, "table": table}


# ---------------------------------------------------------------------------
# Spec-driven execution (used by the CLI and by report re-runs)


def _load_extractor(options: dict):
    ex = options.get("extractor", {"kind": "toy", "seed": 0, "dim": 2048})
    if ex["kind"] == "toy":
        return ToyEmbedder(seed=ex["seed"], dim=ex["dim"])
    if ex["kind"] == "plugin":
        return PluginExtractor(ex["command"], output_dim=ex["dim"])
    raise ConfigError(f"unknown extractor kind {ex['kind']!r}")


def _load_corpus_images(image_dir) -> list[RasterImage]:
    return [load_png(p) for p in list_corpus(image_dir)]


def run_experiment(spec: ExperimentSpec) -> dict:
    """Execute an experiment from its spec; the report embeds the spec."""
    spec.validate_files()
    if spec.kind == "convergence":
        real = read_features(spec.inputs["real"])
        variants = {
            label: read_features(path) for label, path in spec.inputs["variants"].items()
        }
        ref = None
        if spec.inputs.get("fid_reference"):
            ref = gaussian_stats(read_features(spec.inputs["fid_reference"]))
        return convergence_study(
            real,
            variants,
            sizes=list(spec.grid),
            runs=spec.runs,
            seed=spec.seed,
            svm_config=spec.svm_config(),
            metrics=spec.metrics or ("p_ids", "u_ids", "fid"),
            fid_reference=ref,
            block_size=spec.options.get("block_size", 1000),
            spec_dict=spec.to_dict(),
        )
    if spec.kind == "subtle":
        images = _load_corpus_images(spec.inputs["images"])
        return subtle_study(
            images,
            pixel_counts=list(spec.grid),
            extractor=_load_extractor(spec.options),
            runs=spec.runs,
            seed=spec.seed,
            svm_config=spec.svm_config(),
            metrics=spec.metrics or ("p_ids", "u_ids", "fid", "kid"),
            block_size=spec.options.get("block_size", 1000),
            spec_dict=spec.to_dict(),
        )
    if spec.kind == "bucket-table":
        real = spec.inputs["real_images"]
        return bucket_table(
            real,
            spec.inputs["fake_dirs"],
            extractor=_load_extractor(spec.options),
            runs=spec.runs,
            seed=spec.seed,
            svm_config=spec.svm_config(),
            buckets=spec.grid or None,
            spec_dict=spec.to_dict(),
        )
    if spec.kind == "correlation":
        result = correlation_analysis(
            spec.inputs["metric_points"], spec.inputs["human_points"]
        )
        cells = [
            _cell(name, None, "pearson", [r]) for name, r in sorted(result["pearson"].items())
        ]
        return _report("correlation", spec.to_dict(), cells, table=result["table"])
    raise ConfigError(f"unknown experiment kind {spec.kind!r}")


def rerun_report(report: dict) -> dict:
    """Re-execute a report from nothing but its embedded spec."""
    return run_experiment(ExperimentSpec.from_dict(report["spec"]))


# ---------------------------------------------------------------------------
# Report serialization


def write_report_json(report: dict, path) -> None:
    try:
        Path(path).write_text(json.dumps(report, indent=1) + "\n")
    except OSError as exc:
        raise IoError(f"cannot write report {path}: {exc}") from exc


def load_report_json(path) -> dict:
    try:
        return json.loads(Path(path).read_text())
    except OSError as exc:
        raise IoError(f"cannot read report {path}: {exc}") from exc


def write_report_csv(report: dict, path) -> None:
    """Tidy cells: one row per (group, param, metric). Floats are written with
    repr so a read-back reproduces them bit-exactly."""
    try:
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["group", "param", "metric", "mean", "std", "values"])
            for cell in report["cells"]:
                writer.writerow(
                    [
                        cell["group"],
                        "" if cell["param"] is None else cell["param"],
                        cell["metric"],
                        repr(cell["mean"]),
                        repr(cell["std"]),
                        ";".join(repr(v) for v in cell["values"]),
                    ]
                )
    except OSError as exc:
        raise IoError(f"cannot write report {path}: {exc}") from exc


def read_report_csv(path) -> list[dict]:
    def parse_param(s: str):
        if s == "":
            return None
        try:
            return int(s)
        except ValueError:
            return s

    cells = []
    try:
        with open(path, newline="") as fh:
            for row in csv.DictReader(fh):
                cells.append(
                    {
                        "group": row["group"],
                        "param": parse_param(row["param"]),
                        "metric": row["metric"],
                        "mean": float(row["mean"]),
                        "std": float(row["std"]),
                        "values": [float(v) for v in row["values"].split(";")],
                    }
                )
    except OSError as exc:
        raise IoError(f"cannot read report {path}: {exc}") from exc
    return cells
