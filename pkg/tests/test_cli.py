import json

import numpy as np
import pytest
from click.testing import CliRunner

from ids_bench.cli import cli, main
from ids_bench.feature_store import FeatureMatrix, read_features, write_features
from ids_bench.bench_harness import load_report_json, rerun_report
from ids_bench.manipulations import RasterImage, load_mask_png, load_png, save_png
from ids_bench.rng import generator_from


@pytest.fixture
def runner():
    return CliRunner()


def write_feature_file(path, n=64, d=8, seed=0, shift=0.0):
    rng = generator_from(seed)
    m = FeatureMatrix((rng.standard_normal((n, d)) + shift).astype(np.float32), "cli-test")
    write_features(m, path)
    return path


def write_image_dir(path, count=6, w=12, h=12, seed=0):
    path.mkdir(parents=True, exist_ok=True)
    rng = generator_from(seed)
    for i in range(count):
        save_png(RasterImage(rng.integers(0, 256, (h, w, 1)).astype(np.uint8)), path / f"{i}.png")
    return path


class TestMetricCommands:
    def test_pids_and_report(self, runner, tmp_path):
        real = write_feature_file(tmp_path / "real.idsf", seed=1)
        fake = write_feature_file(tmp_path / "fake.idsf", seed=2)
        out = tmp_path / "report.json"
        result = runner.invoke(
            cli,
            ["pids", "--real", str(real), "--fake", str(fake), "--runs", "2", "--seed", "5", "--out", str(out)],
        )
        assert result.exit_code == 0, result.output
        report = json.loads(out.read_text())
        assert report["name"] == "p_ids"
        assert len(report["per_run_values"]) == 2
        assert report["inputs"]["real"] == str(real)

    def test_uids(self, runner, tmp_path):
        real = write_feature_file(tmp_path / "real.idsf", seed=1)
        fake = write_feature_file(tmp_path / "fake.idsf", seed=2, shift=3.0)
        result = runner.invoke(cli, ["uids", "--real", str(real), "--fake", str(fake), "--runs", "1"])
        assert result.exit_code == 0, result.output
        assert "u_ids" in result.output

    def test_fid_identity(self, runner, tmp_path):
        real = write_feature_file(tmp_path / "real.idsf", seed=1)
        result = runner.invoke(cli, ["fid", "--real", str(real), "--fake", str(real)])
        assert result.exit_code == 0
        assert float(result.output.split()[-1]) == pytest.approx(0.0, abs=1e-9)

    def test_kid(self, runner, tmp_path):
        real = write_feature_file(tmp_path / "real.idsf", n=40, seed=1)
        fake = write_feature_file(tmp_path / "fake.idsf", n=40, seed=2)
        result = runner.invoke(
            cli, ["kid", "--real", str(real), "--fake", str(fake), "--block-size", "20", "--runs", "2"]
        )
        assert result.exit_code == 0, result.output

    def test_pearson_data_mode(self, runner, tmp_path):
        data = tmp_path / "points.json"
        data.write_text(json.dumps({"xs": [1, 2, 3, 4], "ys": [1, 3, 2, 4]}))
        result = runner.invoke(cli, ["pearson", "--data", str(data)])
        assert result.exit_code == 0
        assert float(result.output.split()[-1]) == pytest.approx(0.8, abs=1e-12)

    def test_pearson_correlation_mode(self, runner, tmp_path):
        metric = tmp_path / "metric.json"
        human = tmp_path / "human.json"
        points = [[f"b{i}", 0.1 * i] for i in range(5)]
        metric.write_text(json.dumps({"p_ids": points}))
        human.write_text(json.dumps(points))
        out = tmp_path / "corr.json"
        result = runner.invoke(
            cli,
            ["pearson", "--metric-points", str(metric), "--human-points", str(human), "--out", str(out)],
        )
        assert result.exit_code == 0, result.output
        report = json.loads(out.read_text())
        assert report["cells"][0]["mean"] == pytest.approx(1.0, abs=1e-12)
        assert len(report["table"]) == 5


class TestCorpusCommands:
    def test_extract_writes_features_and_manifest(self, runner, tmp_path):
        imgs = write_image_dir(tmp_path / "imgs")
        out = tmp_path / "features.idsf"
        manifest = tmp_path / "manifest.json"
        result = runner.invoke(
            cli,
            ["extract", "--images", str(imgs), "--out", str(out), "--manifest", str(manifest), "--dim", "16"],
        )
        assert result.exit_code == 0, result.output
        m = read_features(out)
        assert (m.n, m.d) == (6, 16)
        rows = json.loads(manifest.read_text())
        assert [r["file"] for r in rows] == sorted(r["file"] for r in rows)

    def test_extract_plugin_contract(self, runner, tmp_path):
        """A minimal plugin: reads paths from stdin, writes a valid IDSF file."""
        imgs = write_image_dir(tmp_path / "imgs", count=3)
        plugin = tmp_path / "plugin.py"
        plugin.write_text(
            "import sys, struct\n"
            "paths = [l.strip() for l in sys.stdin if l.strip()]\n"
            "out = sys.argv[1]\n"
            "with open(out, 'wb') as fh:\n"
            "    fh.write(b'IDSF')\n"
            "    fh.write(struct.pack('<III', 1, len(paths), 4))\n"
            "    for i, p in enumerate(paths):\n"
            "        for j in range(4):\n"
            "            fh.write(struct.pack('<f', float(i + j)))\n"
            "    fh.write(struct.pack('<I', 0))\n"
        )
        out = tmp_path / "features.idsf"
        result = runner.invoke(
            cli,
            [
                "extract", "--images", str(imgs), "--out", str(out),
                "--extractor", "plugin", "--plugin-cmd", f"python3 {plugin}", "--dim", "4",
            ],
        )
        assert result.exit_code == 0, result.output
        m = read_features(out)
        assert (m.n, m.d) == (3, 4)
        assert m.data[1].tolist() == [1.0, 2.0, 3.0, 4.0]

    def test_maskgen_deterministic_and_in_ratio(self, runner, tmp_path):
        out1 = tmp_path / "masks1"
        out2 = tmp_path / "masks2"
        args = [
            "maskgen", "--width", "128", "--height", "128", "--count", "3",
            "--ratio-min", "0.2", "--ratio-max", "0.6", "--seed", "9",
        ]
        assert runner.invoke(cli, args + ["--out", str(out1)]).exit_code == 0
        assert runner.invoke(cli, args + ["--out", str(out2)]).exit_code == 0
        for i in range(3):
            name = f"mask_{i:05d}.png"
            a = (out1 / name).read_bytes()
            b = (out2 / name).read_bytes()
            assert a == b
            ratio = load_mask_png(out1 / name).masked_ratio
            assert 0.2 < ratio < 0.6

    def test_manipulate_square(self, runner, tmp_path):
        imgs = write_image_dir(tmp_path / "imgs", count=2)
        out = tmp_path / "squared"
        result = runner.invoke(
            cli,
            ["manipulate", "--images", str(imgs), "--out", str(out), "--op", "square", "--param", "4"],
        )
        assert result.exit_code == 0, result.output
        manipulated = load_png(out / "0.png")
        original = load_png(imgs / "0.png")
        changed = np.any(manipulated.data != original.data, axis=2)
        assert changed.sum() <= 16

    def test_manipulate_noisy(self, runner, tmp_path):
        imgs = write_image_dir(tmp_path / "imgs", count=2)
        out = tmp_path / "noisy"
        result = runner.invoke(
            cli,
            ["manipulate", "--images", str(imgs), "--out", str(out), "--op", "noisy", "--param", "5"],
        )
        assert result.exit_code == 0, result.output
        manipulated = load_png(out / "1.png")
        original = load_png(imgs / "1.png")
        changed = np.any(manipulated.data != original.data, axis=2)
        assert changed.sum() <= 5


class TestExperimentCommands:
    def test_convergence_report_and_rerun(self, runner, tmp_path):
        real = write_feature_file(tmp_path / "real.idsf", n=80, d=8, seed=1)
        base = read_features(real)
        noisy = FeatureMatrix(
            base.data + 0.5 * generator_from(7).standard_normal(base.data.shape).astype(np.float32)
        )
        fake = tmp_path / "fake.idsf"
        write_features(noisy, fake)
        out = tmp_path / "report.json"
        csv_out = tmp_path / "report.csv"
        result = runner.invoke(
            cli,
            [
                "convergence", "--real", str(real), "--variant", f"noisy={fake}",
                "--sizes", "40,80", "--runs", "2", "--seed", "3",
                "--out", str(out), "--csv", str(csv_out),
            ],
        )
        assert result.exit_code == 0, result.output
        report = load_report_json(out)
        assert rerun_report(report)["cells"] == report["cells"]
        assert csv_out.exists()

    def test_subtle_command(self, runner, tmp_path):
        imgs = write_image_dir(tmp_path / "imgs", count=20, w=16, h=16)
        out = tmp_path / "subtle.json"
        result = runner.invoke(
            cli,
            [
                "subtle", "--images", str(imgs), "--pixel-counts", "0,8", "--runs", "1",
                "--seed", "2", "--dim", "16", "--metrics", "p_ids,fid", "--out", str(out),
            ],
        )
        assert result.exit_code == 0, result.output
        report = load_report_json(out)
        assert rerun_report(report)["cells"] == report["cells"]

    def test_bucket_table_command(self, runner, tmp_path):
        imgs = write_image_dir(tmp_path / "real", count=10)
        out = tmp_path / "buckets.json"
        result = runner.invoke(
            cli,
            [
                "bucket-table", "--real-images", str(imgs), "--fake", f"0.0-0.2={imgs}",
                "--runs", "1", "--dim", "8", "--out", str(out),
            ],
        )
        assert result.exit_code == 0, result.output
        report = load_report_json(out)
        assert report["rows"]["(0.0, 0.2)"]["p_ids"]["mean"] == 0.0


class TestExitCodes:
    def _main_exit(self, monkeypatch, argv):
        import sys

        monkeypatch.setattr(sys, "argv", ["ids-bench"] + argv)
        with pytest.raises(SystemExit) as exc:
            main()
        return exc.value.code

    def test_usage_error_is_2(self, monkeypatch):
        assert self._main_exit(monkeypatch, ["pids"]) == 2  # missing required options

    def test_missing_file_is_2(self, monkeypatch, tmp_path):
        code = self._main_exit(
            monkeypatch,
            ["pids", "--real", str(tmp_path / "a.idsf"), "--fake", str(tmp_path / "b.idsf")],
        )
        assert code == 2

    def test_corrupt_feature_file_is_5(self, monkeypatch, tmp_path):
        bad = tmp_path / "bad.idsf"
        bad.write_bytes(b"JUNKJUNKJUNKJUNKJUNKJUNK")
        code = self._main_exit(
            monkeypatch, ["fid", "--real", str(bad), "--fake", str(bad)]
        )
        assert code == 5

    def test_saturation_is_4(self, monkeypatch, tmp_path):
        code = self._main_exit(
            monkeypatch,
            [
                "maskgen", "--width", "32", "--height", "32", "--count", "1",
                "--ratio-min", "0.999999", "--ratio-max", "1.0",
                "--max-attempts", "5", "--out", str(tmp_path / "m"),
            ],
        )
        assert code == 4

    def test_numerical_error_is_3(self, monkeypatch):
        import sys

        import ids_bench.cli as cli_mod
        from ids_bench.errors import NumericalError

        @cli_mod.cli.command(name="_boom")
        def _boom():
            raise NumericalError("synthetic")

        monkeypatch.setattr(sys, "argv", ["ids-bench", "_boom"])
        with pytest.raises(SystemExit) as exc:
            main()
        assert exc.value.code == 3
