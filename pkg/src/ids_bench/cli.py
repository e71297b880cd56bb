"""Command-line interface.

Exit codes: 0 success, 2 configuration error, 3 numerical error, 4 rejection
sampling saturated, 5 I/O error.
"""

from __future__ import annotations

import json
import sys
from pathlib import Path

import click

from . import __version__
from .baseline_metrics import fid as fid_fn
from .baseline_metrics import gaussian_stats, kid as kid_fn, pearson as pearson_fn
from .bench_harness import (
    BUCKET_LABELS,
    ExperimentSpec,
    run_experiment,
    write_report_csv,
    write_report_json,
)
from .errors import ConfigError, IdsBenchError
from .feature_store import (
    PairedFeatureSet,
    PluginExtractor,
    ToyEmbedder,
    extract_corpus,
    read_features,
    write_features,
)
from .ids_metrics import p_ids, run_repeated, u_ids
from .linear_svm import SvmConfig
from .manipulations import (
    MaskSamplerConfig,
    load_png,
    mask_square,
    noisy_pixels,
    sample_free_form_mask,
    sample_mask_in_ratio,
    save_mask_png,
    save_png,
)
from .rng import split_seed

_svm_options = [
    click.option("--svm-c", default=1.0, show_default=True, help="SVM regularization C."),
    click.option("--svm-tol", default=1e-4, show_default=True, help="SVM stopping tolerance."),
    click.option("--svm-max-epochs", default=1000, show_default=True, help="SVM epoch cap."),
]


def svm_options(fn):
    for opt in reversed(_svm_options):
        fn = opt(fn)
    return fn


def _write_metric_report(result, out, inputs):
    if out:
        report = result.to_dict()
        report["inputs"] = inputs
        Path(out).write_text(json.dumps(report, indent=1) + "\n")


def _echo_metric(result):
    click.echo(
        f"{result.name}: mean={result.mean!r} std={result.std!r} "
        f"runs={len(result.per_run_values)} n={result.n_samples}"
    )


@click.group()
@click.version_option(__version__)
def cli():
    """Fidelity metrics, robustness experiments, mask synthesis, user studies."""


@cli.command()
@click.option("--real", "real_path", required=True, type=click.Path(exists=True))
@click.option("--fake", "fake_path", required=True, type=click.Path(exists=True))
@click.option("--runs", default=5, show_default=True)
@click.option("--seed", default=0, show_default=True)
@click.option("--out", type=click.Path(), help="Write a JSON report here.")
@svm_options
def pids(real_path, fake_path, runs, seed, out, svm_c, svm_tol, svm_max_epochs):
    """Paired discriminative score of two row-aligned feature files."""
    pairs = PairedFeatureSet(read_features(real_path), read_features(fake_path))
    cfg = SvmConfig(svm_c, svm_tol, svm_max_epochs)
    result = run_repeated(lambda s: p_ids(pairs, cfg, s), runs, seed)
    _echo_metric(result)
    _write_metric_report(result, out, {"real": str(real_path), "fake": str(fake_path)})


@cli.command()
@click.option("--real", "real_path", required=True, type=click.Path(exists=True))
@click.option("--fake", "fake_path", required=True, type=click.Path(exists=True))
@click.option("--runs", default=5, show_default=True)
@click.option("--seed", default=0, show_default=True)
@click.option("--allow-unequal", is_flag=True, help="Permit unequal class sizes (watermarked).")
@click.option("--out", type=click.Path())
@svm_options
def uids(real_path, fake_path, runs, seed, allow_unequal, out, svm_c, svm_tol, svm_max_epochs):
    """Unpaired discriminative score of two feature files."""
    real = read_features(real_path)
    fake = read_features(fake_path)
    cfg = SvmConfig(svm_c, svm_tol, svm_max_epochs)
    result = run_repeated(
        lambda s: u_ids(real, fake, cfg, s, allow_unequal=allow_unequal), runs, seed
    )
    _echo_metric(result)
    _write_metric_report(result, out, {"real": str(real_path), "fake": str(fake_path)})


@cli.command()
@click.option("--real", "real_path", required=True, type=click.Path(exists=True))
@click.option("--fake", "fake_path", required=True, type=click.Path(exists=True))
@click.option("--out", type=click.Path())
def fid(real_path, fake_path, out):
    """Frechet distance between Gaussian fits of two feature files."""
    value = fid_fn(
        gaussian_stats(read_features(real_path)), gaussian_stats(read_features(fake_path))
    )
    click.echo(f"fid: {value!r}")
    if out:
        Path(out).write_text(
            json.dumps(
                {"name": "fid", "value": value, "inputs": {"real": str(real_path), "fake": str(fake_path)}},
                indent=1,
            )
            + "\n"
        )


@cli.command()
@click.option("--real", "real_path", required=True, type=click.Path(exists=True))
@click.option("--fake", "fake_path", required=True, type=click.Path(exists=True))
@click.option("--block-size", default=1000, show_default=True)
@click.option("--runs", default=5, show_default=True)
@click.option("--seed", default=0, show_default=True)
@click.option("--out", type=click.Path())
def kid(real_path, fake_path, block_size, runs, seed, out):
    """Block-averaged unbiased kernel distance between two feature files."""
    real = read_features(real_path)
    fake = read_features(fake_path)
    result = run_repeated(lambda s: kid_fn(real, fake, block_size, s), runs, seed)
    _echo_metric(result)
    _write_metric_report(result, out, {"real": str(real_path), "fake": str(fake_path)})


@cli.command()
@click.option("--data", type=click.Path(exists=True), help='JSON {"xs": [...], "ys": [...]}.')
@click.option("--metric-points", type=click.Path(exists=True), help="JSON metric -> [[label, value], ...].")
@click.option("--human-points", type=click.Path(exists=True), help="JSON [[label, rate], ...].")
@click.option("--out", type=click.Path())
@click.option("--csv", "csv_out", type=click.Path(), help="Also write the scatter table as CSV.")
def pearson(data, metric_points, human_points, out, csv_out):
    """Pearson correlation: plain xs/ys, or labeled metric-vs-human analysis."""
    if data:
        payload = json.loads(Path(data).read_text())
        value = pearson_fn(payload["xs"], payload["ys"])
        click.echo(f"pearson: {value!r}")
        if out:
            Path(out).write_text(json.dumps({"name": "pearson", "value": value}, indent=1) + "\n")
        return
    if not (metric_points and human_points):
        raise ConfigError("provide --data, or both --metric-points and --human-points")
    spec = ExperimentSpec(
        kind="correlation",
        inputs={
            "metric_points": json.loads(Path(metric_points).read_text()),
            "human_points": json.loads(Path(human_points).read_text()),
        },
    )
    report = run_experiment(spec)
    for cell in report["cells"]:
        click.echo(f"pearson[{cell['group']}]: {cell['mean']!r}")
    if out:
        write_report_json(report, out)
    if csv_out:
        write_report_csv(report, csv_out)


@cli.command()
@click.option("--images", "image_dir", required=True, type=click.Path(exists=True, file_okay=False))
@click.option("--out", required=True, type=click.Path(), help="Output IDSF feature file.")
@click.option("--manifest", "manifest_out", type=click.Path(), help="Row -> filename manifest JSON.")
@click.option("--extractor", type=click.Choice(["toy", "plugin"]), default="toy", show_default=True)
@click.option("--plugin-cmd", help="Plugin command line (required with --extractor plugin).")
@click.option("--dim", default=2048, show_default=True)
@click.option("--embed-seed", default=0, show_default=True, help="Toy embedder projection seed.")
def extract(image_dir, out, manifest_out, extractor, plugin_cmd, dim, embed_seed):
    """Extract features for every PNG in a directory (filename order)."""
    if extractor == "plugin":
        if not plugin_cmd:
            raise ConfigError("--plugin-cmd is required with --extractor plugin")
        ex = PluginExtractor(plugin_cmd.split(), output_dim=dim)
    else:
        ex = ToyEmbedder(seed=embed_seed, dim=dim)
    m = extract_corpus(ex, image_dir, manifest_out)
    write_features(m, out)
    click.echo(f"extracted {m.n}x{m.d} features -> {out}")


@cli.command()
@click.option("--width", default=512, show_default=True)
@click.option("--height", default=512, show_default=True)
@click.option("--count", default=1, show_default=True)
@click.option("--ratio-min", default=0.0, show_default=True)
@click.option("--ratio-max", default=1.0, show_default=True)
@click.option("--seed", default=0, show_default=True)
@click.option("--max-attempts", default=10000, show_default=True)
@click.option("--out", "out_dir", required=True, type=click.Path(file_okay=False))
def maskgen(width, height, count, ratio_min, ratio_max, seed, max_attempts, out_dir):
    """Sample free-form masks, optionally rejection-conditioned on ratio."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    cfg = MaskSamplerConfig()
    constrained = (ratio_min, ratio_max) != (0.0, 1.0)
    for i in range(count):
        mask_seed = split_seed(seed, "mask", i)
        if constrained:
            mask = sample_mask_in_ratio(
                width, height, cfg, ratio_min, ratio_max, mask_seed, max_attempts
            )
        else:
            mask = sample_free_form_mask(width, height, cfg, mask_seed)
        save_mask_png(mask, out / f"mask_{i:05d}.png")
    click.echo(f"wrote {count} masks -> {out}")


@cli.command()
@click.option("--images", "image_dir", required=True, type=click.Path(exists=True, file_okay=False))
@click.option("--out", "out_dir", required=True, type=click.Path(file_okay=False))
@click.option("--op", type=click.Choice(["square", "noisy"]), required=True)
@click.option("--param", required=True, type=int, help="Square width / noisy pixel count.")
@click.option("--seed", default=0, show_default=True)
def manipulate(image_dir, out_dir, op, param, seed):
    """Corrupt every PNG in a directory (square zero-mask or noisy pixels)."""
    from .feature_store import list_corpus

    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    for i, path in enumerate(list_corpus(image_dir)):
        img = load_png(path)
        img_seed = split_seed(seed, op, i)
        result = mask_square(img, param, img_seed) if op == "square" else noisy_pixels(img, param, img_seed)
        save_png(result, out / path.name)
    click.echo(f"manipulated corpus -> {out}")


def _report_outputs(report, out, csv_out):
    if out:
        write_report_json(report, out)
    if csv_out:
        write_report_csv(report, csv_out)
    for cell in report["cells"]:
        param = "" if cell["param"] is None else f" {cell['param']}"
        click.echo(
            f"{cell['group']}{param} {cell['metric']}: mean={cell['mean']!r} std={cell['std']!r}"
        )


@cli.command()
@click.option("--real", "real_path", required=True, type=click.Path(exists=True))
@click.option(
    "--variant",
    "variants",
    multiple=True,
    required=True,
    help="label=FEATURES.idsf, repeatable.",
)
@click.option("--sizes", required=True, help="Comma-separated ascending sample sizes.")
@click.option("--runs", default=5, show_default=True)
@click.option("--seed", default=0, show_default=True)
@click.option("--metrics", default="p_ids,u_ids,fid", show_default=True)
@click.option("--fid-reference", type=click.Path(exists=True), help="Fixed FID reference features.")
@click.option("--block-size", default=1000, show_default=True)
@click.option("--out", type=click.Path())
@click.option("--csv", "csv_out", type=click.Path())
@svm_options
def convergence(
    real_path, variants, sizes, runs, seed, metrics, fid_reference, block_size, out, csv_out,
    svm_c, svm_tol, svm_max_epochs,
):
    """Sampling-size robustness study over fake variants."""
    variant_map = {}
    for spec in variants:
        if "=" not in spec:
            raise ConfigError(f"--variant wants label=path, got {spec!r}")
        label, path = spec.split("=", 1)
        variant_map[label] = path
    spec = ExperimentSpec(
        kind="convergence",
        runs=runs,
        seed=seed,
        metrics=tuple(m.strip() for m in metrics.split(",") if m.strip()),
        grid=tuple(int(s) for s in sizes.split(",")),
        inputs={
            "real": str(real_path),
            "variants": variant_map,
            "fid_reference": str(fid_reference) if fid_reference else None,
        },
        svm={"c": svm_c, "tol": svm_tol, "max_epochs": svm_max_epochs},
        options={"block_size": block_size},
    )
    _report_outputs(run_experiment(spec), out, csv_out)


@cli.command()
@click.option("--images", "image_dir", required=True, type=click.Path(exists=True, file_okay=False))
@click.option("--pixel-counts", required=True, help="Comma-separated ascending pixel counts.")
@click.option("--runs", default=5, show_default=True)
@click.option("--seed", default=0, show_default=True)
@click.option("--metrics", default="p_ids,u_ids,fid,kid", show_default=True)
@click.option("--dim", default=2048, show_default=True)
@click.option("--embed-seed", default=0, show_default=True)
@click.option("--block-size", default=1000, show_default=True)
@click.option("--out", type=click.Path())
@click.option("--csv", "csv_out", type=click.Path())
@svm_options
def subtle(
    image_dir, pixel_counts, runs, seed, metrics, dim, embed_seed, block_size, out, csv_out,
    svm_c, svm_tol, svm_max_epochs,
):
    """Subtle-difference sensitivity study (interpolated noisy pixels)."""
    spec = ExperimentSpec(
        kind="subtle",
        runs=runs,
        seed=seed,
        metrics=tuple(m.strip() for m in metrics.split(",") if m.strip()),
        grid=tuple(int(s) for s in pixel_counts.split(",")),
        inputs={"images": str(image_dir)},
        svm={"c": svm_c, "tol": svm_tol, "max_epochs": svm_max_epochs},
        options={
            "block_size": block_size,
            "extractor": {"kind": "toy", "seed": embed_seed, "dim": dim},
        },
    )
    _report_outputs(run_experiment(spec), out, csv_out)


def _parse_bucket(label: str) -> str:
    compact = {
        "0.0-0.2": BUCKET_LABELS[0],
        "0.2-0.4": BUCKET_LABELS[1],
        "0.4-0.6": BUCKET_LABELS[2],
        "0.6-0.8": BUCKET_LABELS[3],
        "0.8-1.0": BUCKET_LABELS[4],
    }
    if label in BUCKET_LABELS:
        return label
    if label in compact:
        return compact[label]
    raise ConfigError(f"unknown bucket {label!r}; use e.g. 0.2-0.4")


@cli.command(name="bucket-table")
@click.option("--real-images", required=True, type=click.Path(exists=True, file_okay=False))
@click.option(
    "--fake",
    "fakes",
    multiple=True,
    required=True,
    help="bucket=DIR with bucket like 0.2-0.4, repeatable.",
)
@click.option("--runs", default=5, show_default=True)
@click.option("--seed", default=0, show_default=True)
@click.option("--dim", default=2048, show_default=True)
@click.option("--embed-seed", default=0, show_default=True)
@click.option("--out", type=click.Path())
@click.option("--csv", "csv_out", type=click.Path())
@svm_options
def bucket_table_cmd(
    real_images, fakes, runs, seed, dim, embed_seed, out, csv_out, svm_c, svm_tol, svm_max_epochs
):
    """Masked-ratio bucket table (paired/unpaired scores + FID per bucket)."""
    fake_dirs = {}
    for spec in fakes:
        if "=" not in spec:
            raise ConfigError(f"--fake wants bucket=dir, got {spec!r}")
        bucket, path = spec.split("=", 1)
        fake_dirs[_parse_bucket(bucket)] = path
    spec = ExperimentSpec(
        kind="bucket-table",
        runs=runs,
        seed=seed,
        grid=tuple(b for b in BUCKET_LABELS if b in fake_dirs),
        inputs={"real_images": str(real_images), "fake_dirs": fake_dirs},
        svm={"c": svm_c, "tol": svm_tol, "max_epochs": svm_max_epochs},
        options={"extractor": {"kind": "toy", "seed": embed_seed, "dim": dim}},
    )
    _report_outputs(run_experiment(spec), out, csv_out)


@cli.command(name="serve-study")
@click.option("--manifest", "manifest_path", required=True, type=click.Path(exists=True))
@click.option("--log", "log_path", required=True, type=click.Path())
@click.option("--port", default=8000, show_default=True)
@click.option("--host", default="127.0.0.1", show_default=True)
@click.option("--seed", type=int, default=None, help="Seeded trial sampling (test mode).")
@click.option("--static", "static_dir", type=click.Path(file_okay=False), help="Built frontend dir.")
def serve_study(manifest_path, log_path, port, host, seed, static_dir):
    """Serve the user-study HTTP API (and the frontend, if built)."""
    import uvicorn

    from .study_server import create_app
    from .study_service import StudyManifest, StudyService

    service = StudyService(StudyManifest.load(manifest_path), log_path, seed=seed)
    app = create_app(service, static_dir=static_dir)
    click.echo(f"serving study on http://{host}:{port} (mode={service.manifest.mode})")
    uvicorn.run(app, host=host, port=port, log_level="warning")


def main():
    try:
        cli(standalone_mode=False)
    except click.exceptions.Abort:
        sys.exit(130)
    except click.ClickException as exc:
        exc.show()
        sys.exit(2)
    except IdsBenchError as exc:
        click.echo(f"error: {exc}", err=True)
        sys.exit(exc.exit_code)


if __name__ == "__main__":
    main()
