"""Feature matrices, the IDSF binary file format, and feature extractors.

The on-disk format is fixed so that independently written tools interoperate
bit-exactly:

    bytes 0-3   magic "IDSF"
    bytes 4-7   version, unsigned 32-bit little-endian (currently 1)
    bytes 8-11  n (rows), unsigned 32-bit little-endian
    bytes 12-15 d (columns), unsigned 32-bit little-endian
    then        n*d little-endian IEEE-754 32-bit floats, row-major
    then        tag length (unsigned 32-bit little-endian) + UTF-8 tag bytes

The heavyweight pretrained feature network is deliberately not linked here;
it plugs in as a subprocess (see :class:`PluginExtractor`). For desk-scale
work :class:`ToyEmbedder` provides a deterministic stand-in.
"""

from __future__ import annotations

import json
import struct
import subprocess
import tempfile
from dataclasses import dataclass
from pathlib import Path
from typing import Protocol, Sequence, runtime_checkable

import numpy as np

from .errors import (
    BadMagicError,
    ConfigError,
    DomainError,
    FeatureFileError,
    IoError,
    NonFiniteError,
    TruncatedFileError,
    UnsupportedVersionError,
)
from .manipulations import RasterImage, load_png
from .rng import generator_from, split_seed

MAGIC = b"IDSF"
FORMAT_VERSION = 1
DEFAULT_DIM = 2048

__all__ = [
    "FeatureMatrix",
    "PairedFeatureSet",
    "FeatureExtractor",
    "ToyEmbedder",
    "PluginExtractor",
    "write_features",
    "read_features",
    "toy_embed",
    "extract_corpus",
]


@dataclass(frozen=True)
class FeatureMatrix:
    """n-by-d matrix of 32-bit float features with a provenance tag."""

    data: np.ndarray
    source_tag: str = ""

    def __post_init__(self):
        arr = np.ascontiguousarray(self.data, dtype=np.float32)
        if arr.ndim != 2 or arr.shape[0] < 1 or arr.shape[1] < 1:
            raise DomainError(f"expected (n, d) feature array with n, d >= 1, got {self.data.shape}")
        if not np.isfinite(arr).all():
            raise DomainError("feature matrix contains non-finite entries")
        arr.flags.writeable = False
        object.__setattr__(self, "data", arr)

    @property
    def n(self) -> int:
        return self.data.shape[0]

    @property
    def d(self) -> int:
        return self.data.shape[1]

    def rows(self, idx: np.ndarray) -> "FeatureMatrix":
        """Submatrix at the given row indices, tag preserved."""
        return FeatureMatrix(self.data[np.asarray(idx)], self.source_tag)


@dataclass(frozen=True)
class PairedFeatureSet:
    """Row-aligned real/fake features: row i of fake corresponds to row i of real."""

    real: FeatureMatrix
    fake: FeatureMatrix

    def __post_init__(self):
        if self.real.n != self.fake.n:
            raise DomainError(f"paired sets need equal row counts, got {self.real.n} vs {self.fake.n}")
        if self.real.d != self.fake.d:
            raise DomainError(f"paired sets need equal dims, got {self.real.d} vs {self.fake.d}")

    @property
    def n(self) -> int:
        return self.real.n


def write_features(m: FeatureMatrix, path) -> None:
    """Write the IDSF binary representation of `m` to `path`."""
    path = Path(path)
    tag = m.source_tag.encode("utf-8")
    try:
        with open(path, "wb") as fh:
            fh.write(MAGIC)
            fh.write(struct.pack("<III", FORMAT_VERSION, m.n, m.d))
            fh.write(m.data.astype("<f4", copy=False).tobytes(order="C"))
            fh.write(struct.pack("<I", len(tag)))
            fh.write(tag)
    except OSError as exc:
        raise IoError(f"cannot write feature file {path}: {exc}") from exc


def read_features(path) -> FeatureMatrix:
    """Read an IDSF file; exact inverse of :func:`write_features`."""
    path = Path(path)
    try:
        blob = path.read_bytes()
    except OSError as exc:
        raise IoError(f"cannot read feature file {path}: {exc}") from exc

    if len(blob) < 16:
        raise TruncatedFileError(f"{path}: header truncated ({len(blob)} bytes)")
    if blob[:4] != MAGIC:
        raise BadMagicError(f"{path}: bad magic {blob[:4]!r}, expected {MAGIC!r}")
    version, n, d = struct.unpack_from("<III", blob, 4)
    if version != FORMAT_VERSION:
        raise UnsupportedVersionError(f"{path}: unsupported version {version}")
    if n < 1 or d < 1:
        raise FeatureFileError(f"{path}: invalid dimensions n={n}, d={d}")
    payload_end = 16 + 4 * n * d
    if len(blob) < payload_end + 4:
        raise TruncatedFileError(
            f"{path}: expected at least {payload_end + 4} bytes, got {len(blob)}"
        )
    data = np.frombuffer(blob, dtype="<f4", count=n * d, offset=16).reshape(n, d)
    if not np.isfinite(data).all():
        raise NonFiniteError(f"{path}: payload contains non-finite entries")
    (tag_len,) = struct.unpack_from("<I", blob, payload_end)
    tag_end = payload_end + 4 + tag_len
    if len(blob) < tag_end:
        raise TruncatedFileError(f"{path}: tag truncated")
    if len(blob) > tag_end:
        raise FeatureFileError(f"{path}: {len(blob) - tag_end} trailing bytes after tag")
    tag = blob[payload_end + 4 : tag_end].decode("utf-8")
    return FeatureMatrix(np.array(data), tag)


# ---------------------------------------------------------------------------
# Extractors


@runtime_checkable
class FeatureExtractor(Protocol):
    """Deterministic image -> feature-row mapping over a batch of files."""

    name: str
    output_dim: int

    def extract_paths(self, paths: Sequence[Path]) -> np.ndarray: ...


def _box_downsample_gray(img: RasterImage, size: int = 32) -> np.ndarray:
    """Grayscale (channel mean) box-averaged to size x size, scaled to [0, 1].

    Box i spans rows [floor(i*h/size), floor((i+1)*h/size)) widened to at
    least one row, so images smaller than the grid degrade to nearest
    sampling instead of empty boxes.
    """
    gray = img.data.astype(np.float64).mean(axis=2) / 255.0
    h, w = gray.shape
    out = np.empty((size, size), dtype=np.float64)
    for i in range(size):
        r0 = (i * h) // size
        r1 = max(r0 + 1, ((i + 1) * h) // size)
        for j in range(size):
            c0 = (j * w) // size
            c1 = max(c0 + 1, ((j + 1) * w) // size)
            out[i, j] = gray[r0:r1, c0:c1].mean()
    return out


def _toy_projection(seed: int, dim: int) -> np.ndarray:
    rng = generator_from(split_seed(seed, "toy-embed-projection", dim))
    return rng.standard_normal((dim, 1024)) / np.sqrt(1024.0)


def toy_embed(img: RasterImage, seed: int, dim: int = DEFAULT_DIM) -> np.ndarray:
    """Deterministic toy feature row: 32x32 gray box-downsample, seeded random
    projection to `dim`, ReLU. Stands in for the pretrained feature network at
    desk scale; more corruption moves the row further, nothing else is claimed.
    """
    if dim < 1:
        raise DomainError("feature dimension must be >= 1")
    if img.width * img.height == 0:
        raise DomainError("zero-area image")
    flat = _box_downsample_gray(img).reshape(1024)
    row = np.maximum(_toy_projection(seed, dim) @ flat, 0.0)
    return row.astype(np.float32)


class ToyEmbedder:
    """FeatureExtractor wrapper around :func:`toy_embed` with a cached projection."""

    def __init__(self, seed: int = 0, dim: int = DEFAULT_DIM):
        if dim < 1:
            raise DomainError("feature dimension must be >= 1")
        self.seed = seed
        self.output_dim = dim
        self.name = f"toy-embedder(seed={seed})"
        self._proj = _toy_projection(seed, dim)

    def embed(self, img: RasterImage) -> np.ndarray:
        if img.width * img.height == 0:
            raise DomainError("zero-area image")
        flat = _box_downsample_gray(img).reshape(1024)
        return np.maximum(self._proj @ flat, 0.0).astype(np.float32)

    def extract_paths(self, paths: Sequence[Path]) -> np.ndarray:
        rows = np.empty((len(paths), self.output_dim), dtype=np.float32)
        for i, p in enumerate(paths):
            rows[i] = self.embed(load_png(p))
        return rows


class PluginExtractor:
    """Runs an external feature extractor via the subprocess contract.

    The plugin is invoked with one argument, the output IDSF path, and receives
    a newline-delimited list of image paths on stdin. It must write one feature
    row per input line, in order. Preprocessing is the plugin's business; its
    tag ends up in the corpus source_tag for the record.
    """

    def __init__(self, command: Sequence[str], output_dim: int = DEFAULT_DIM, name: str | None = None):
        if not command:
            raise ConfigError("plugin command must be non-empty")
        self.command = list(command)
        self.output_dim = output_dim
        self.name = name or f"plugin({self.command[0]})"

    def extract_paths(self, paths: Sequence[Path]) -> np.ndarray:
        with tempfile.TemporaryDirectory(prefix="ids-plugin-") as tmp:
            out_path = Path(tmp) / "features.idsf"
            stdin = "".join(f"{p}\n" for p in paths)
            proc = subprocess.run(
                [*self.command, str(out_path)],
                input=stdin.encode(),
                capture_output=True,
            )
            if proc.returncode != 0:
                raise IoError(
                    f"feature plugin failed (exit {proc.returncode}): "
                    f"{proc.stderr.decode(errors='replace').strip()}"
                )
            m = read_features(out_path)
        if m.n != len(paths):
            raise FeatureFileError(f"plugin wrote {m.n} rows for {len(paths)} images")
        if m.d != self.output_dim:
            raise FeatureFileError(f"plugin wrote d={m.d}, expected {self.output_dim}")
        return np.array(m.data)


def list_corpus(image_dir) -> list[Path]:
    """PNG files of a directory in lexicographic filename order."""
    image_dir = Path(image_dir)
    if not image_dir.is_dir():
        raise ConfigError(f"not a directory: {image_dir}")
    files = sorted(
        (p for p in image_dir.iterdir() if p.is_file() and p.suffix.lower() == ".png"),
        key=lambda p: p.name,
    )
    if not files:
        raise ConfigError(f"no PNG images in {image_dir}")
    return files


def extract_corpus(extractor: FeatureExtractor, image_dir, manifest_out=None) -> FeatureMatrix:
    """Extract features for every PNG in a directory, in filename order.

    Writes a manifest (JSON array of {"row": i, "file": name}) mapping matrix
    rows back to files when `manifest_out` is given.
    """
    files = list_corpus(image_dir)
    rows = extractor.extract_paths(files)
    if rows.shape != (len(files), extractor.output_dim):
        raise FeatureFileError(
            f"extractor returned shape {rows.shape}, expected {(len(files), extractor.output_dim)}"
        )
    if manifest_out is not None:
        manifest = [{"row": i, "file": p.name} for i, p in enumerate(files)]
        try:
            Path(manifest_out).write_text(json.dumps(manifest, indent=1) + "\n")
        except OSError as exc:
            raise IoError(f"cannot write manifest {manifest_out}: {exc}") from exc
    tag = f"{extractor.name} dir={Path(image_dir).name} n={len(files)}"
    return FeatureMatrix(rows, tag)
