import struct

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ids_bench.errors import (
    BadMagicError,
    ConfigError,
    DomainError,
    FeatureFileError,
    IoError,
    NonFiniteError,
    TruncatedFileError,
    UnsupportedVersionError,
)
from ids_bench.feature_store import (
    FeatureMatrix,
    PairedFeatureSet,
    ToyEmbedder,
    extract_corpus,
    read_features,
    toy_embed,
    write_features,
)
from ids_bench.manipulations import RasterImage, save_png
from ids_bench.rng import generator_from


def random_matrix(n, d, seed=0, tag="t"):
    rng = generator_from(seed)
    return FeatureMatrix(rng.standard_normal((n, d)).astype(np.float32), tag)


class TestFeatureMatrix:
    def test_rejects_nan(self):
        data = np.zeros((2, 2), dtype=np.float32)
        data[0, 0] = np.nan
        with pytest.raises(DomainError):
            FeatureMatrix(data)

    def test_rejects_empty(self):
        with pytest.raises(DomainError):
            FeatureMatrix(np.zeros((0, 4), dtype=np.float32))

    def test_immutable(self):
        m = random_matrix(3, 4)
        with pytest.raises(ValueError):
            m.data[0, 0] = 1.0

    def test_paired_set_requires_alignment(self):
        with pytest.raises(DomainError):
            PairedFeatureSet(random_matrix(3, 4), random_matrix(2, 4))
        with pytest.raises(DomainError):
            PairedFeatureSet(random_matrix(3, 4), random_matrix(3, 5))


class TestIdsfFormat:
    def test_minimal_file_layout(self, tmp_path):
        # 4 magic + 4 version + 4 n + 4 d + 4 float + 4 tag-length, empty tag
        path = tmp_path / "one.idsf"
        write_features(FeatureMatrix(np.zeros((1, 1), dtype=np.float32), ""), path)
        blob = path.read_bytes()
        assert len(blob) == 24
        assert blob[:4] == b"IDSF"
        assert struct.unpack_from("<III", blob, 4) == (1, 1, 1)
        assert struct.unpack_from("<f", blob, 16) == (0.0,)
        assert struct.unpack_from("<I", blob, 20) == (0,)

    def test_round_trip_large(self, tmp_path):
        m = random_matrix(100, 2048, seed=7, tag="round-trip")
        path = tmp_path / "big.idsf"
        write_features(m, path)
        back = read_features(path)
        assert back.source_tag == "round-trip"
        assert back.data.tobytes() == m.data.tobytes()

    @settings(max_examples=25, deadline=None)
    @given(
        n=st.integers(1, 8),
        d=st.integers(1, 16),
        seed=st.integers(0, 2**32 - 1),
        tag=st.text(max_size=40),
    )
    def test_round_trip_property(self, tmp_path_factory, n, d, seed, tag):
        m = random_matrix(n, d, seed=seed, tag=tag)
        path = tmp_path_factory.mktemp("idsf") / "m.idsf"
        write_features(m, path)
        back = read_features(path)
        assert back.data.tobytes() == m.data.tobytes()
        assert back.source_tag == tag

    def test_wrong_magic_rejected(self, tmp_path):
        path = tmp_path / "bad.idsf"
        write_features(random_matrix(2, 2), path)
        blob = bytearray(path.read_bytes())
        blob[:4] = b"JUNK"
        path.write_bytes(bytes(blob))
        with pytest.raises(BadMagicError):
            read_features(path)

    def test_unsupported_version(self, tmp_path):
        path = tmp_path / "v2.idsf"
        write_features(random_matrix(2, 2), path)
        blob = bytearray(path.read_bytes())
        struct.pack_into("<I", blob, 4, 2)
        path.write_bytes(bytes(blob))
        with pytest.raises(UnsupportedVersionError):
            read_features(path)

    def test_truncated_payload(self, tmp_path):
        path = tmp_path / "cut.idsf"
        write_features(random_matrix(4, 8), path)
        blob = path.read_bytes()
        path.write_bytes(blob[: 16 + 4 * 4 * 8 // 2])
        with pytest.raises(TruncatedFileError):
            read_features(path)

    def test_non_finite_payload(self, tmp_path):
        path = tmp_path / "inf.idsf"
        write_features(random_matrix(1, 2), path)
        blob = bytearray(path.read_bytes())
        struct.pack_into("<f", blob, 16, float("inf"))
        path.write_bytes(bytes(blob))
        with pytest.raises(NonFiniteError):
            read_features(path)

    def test_trailing_garbage(self, tmp_path):
        path = tmp_path / "extra.idsf"
        write_features(random_matrix(1, 1), path)
        path.write_bytes(path.read_bytes() + b"x")
        with pytest.raises(FeatureFileError):
            read_features(path)

    def test_missing_file(self, tmp_path):
        with pytest.raises(IoError):
            read_features(tmp_path / "nope.idsf")


def black_image(w=16, h=16, channels=1):
    return RasterImage.full(w, h, 0, channels)


class TestToyEmbed:
    def test_black_image_maps_to_zero(self):
        row = toy_embed(black_image(), seed=3, dim=64)
        assert row.shape == (64,)
        assert np.all(row == 0.0)

    def test_deterministic(self):
        img = RasterImage(generator_from(5).integers(0, 256, (20, 30, 3)).astype(np.uint8))
        a = toy_embed(img, seed=9, dim=128)
        b = toy_embed(img, seed=9, dim=128)
        assert a.tobytes() == b.tobytes()

    def test_single_pixel_change_moves_row(self):
        base = generator_from(11).integers(0, 200, (32, 32, 1)).astype(np.uint8)
        bumped = base.copy()
        bumped[4, 7, 0] += 50
        a = toy_embed(RasterImage(base), seed=2, dim=256)
        b = toy_embed(RasterImage(bumped), seed=2, dim=256)
        assert np.any(a != b)

    def test_nonnegative_outputs(self):
        img = RasterImage(generator_from(13).integers(0, 256, (17, 23, 3)).astype(np.uint8))
        assert toy_embed(img, seed=1, dim=512).min() >= 0.0

    def test_embedder_matches_function(self):
        img = RasterImage(generator_from(21).integers(0, 256, (8, 8, 1)).astype(np.uint8))
        emb = ToyEmbedder(seed=4, dim=96)
        assert emb.embed(img).tobytes() == toy_embed(img, seed=4, dim=96).tobytes()


class TestExtractCorpus:
    def _write_corpus(self, tmp_path, images):
        d = tmp_path / "imgs"
        d.mkdir()
        for name, img in images.items():
            save_png(img, d / name)
        return d

    def test_black_corpus_zero_rows(self, tmp_path):
        d = self._write_corpus(
            tmp_path, {f"{i}.png": black_image() for i in range(3)}
        )
        m = extract_corpus(ToyEmbedder(seed=0, dim=32), d, tmp_path / "manifest.json")
        assert m.n == 3
        assert np.all(m.data == 0.0)

    def test_order_is_lexicographic(self, tmp_path):
        rng = generator_from(3)
        imgs = {
            name: RasterImage(rng.integers(0, 256, (8, 8, 1)).astype(np.uint8))
            for name in ("b.png", "a.png", "c.png")
        }
        d = self._write_corpus(tmp_path, imgs)
        manifest_path = tmp_path / "manifest.json"
        m = extract_corpus(ToyEmbedder(seed=1, dim=16), d, manifest_path)
        import json

        manifest = json.loads(manifest_path.read_text())
        assert [e["file"] for e in manifest] == ["a.png", "b.png", "c.png"]
        assert [e["row"] for e in manifest] == [0, 1, 2]
        emb = ToyEmbedder(seed=1, dim=16)
        assert np.array_equal(m.data[0], emb.embed(imgs["a.png"]))

    def test_rerun_bit_identical(self, tmp_path):
        rng = generator_from(17)
        imgs = {
            f"img_{i:02d}.png": RasterImage(rng.integers(0, 256, (12, 9, 3)).astype(np.uint8))
            for i in range(10)
        }
        d = self._write_corpus(tmp_path, imgs)
        emb = ToyEmbedder(seed=5, dim=64)
        a = extract_corpus(emb, d)
        b = extract_corpus(emb, d)
        assert a.data.tobytes() == b.data.tobytes()

    def test_empty_directory(self, tmp_path):
        d = tmp_path / "empty"
        d.mkdir()
        with pytest.raises(ConfigError):
            extract_corpus(ToyEmbedder(dim=8), d)

    def test_undecodable_image_names_file(self, tmp_path):
        d = tmp_path / "imgs"
        d.mkdir()
        (d / "broken.png").write_bytes(b"not a png at all")
        with pytest.raises(IoError, match="broken.png"):
            extract_corpus(ToyEmbedder(dim=8), d)
