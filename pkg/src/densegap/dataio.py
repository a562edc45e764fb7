"""Labeled feature-matrix I/O plus a seeded synthetic generator.

File formats
------------
CSV: UTF-8, header ``label,f0,f1,...,f{d-1}``, one sample per row with the
class label first. The writer emits LF line endings and 9 significant digits,
enough to reparse every 32-bit value exactly. The reader accepts LF or CRLF.

Binary (``.fmx``): little-endian throughout, no padding::

    "FMX1"                       4-byte magic
    u32 n, u32 d, u32 k          sample / feature / class counts
    k * (u16 len + UTF-8 bytes)  class names
    n * u32                      label indices
    n*d * f32                    values, row-major

Values are 32-bit on disk and in memory; statistics downstream widen to
64-bit before accumulating.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import (
    BadMagic,
    HeaderMismatch,
    InvalidSpec,
    IoFailure,
    LabelIndexOutOfRange,
    MissingFile,
    NonFiniteValue,
    RaggedRow,
    TruncatedPayload,
)

_MAGIC = b"FMX1"

# Class names travel through the unquoted CSV label column, so separators and
# line breaks are rejected at construction rather than corrupting files later.
_FORBIDDEN_IN_NAME = (",", "\n", "\r")


@dataclass(frozen=True, eq=False)
class FeatureMatrix:
    """n x d float32 values with one class label per row. Immutable.

    `labels` holds indices into `class_names`, which is ordered by first
    appearance when loaded from a file.
    """

    values: np.ndarray
    labels: np.ndarray
    class_names: tuple[str, ...]

    def __post_init__(self):
        values = np.ascontiguousarray(self.values, dtype=np.float32)
        labels = np.ascontiguousarray(self.labels, dtype=np.int64)
        names = tuple(str(c) for c in self.class_names)
        if values.ndim != 2:
            raise ValueError("values must be a 2-D matrix")
        n, d = values.shape
        if n < 1 or d < 1:
            raise ValueError(f"matrix must have n >= 1 and d >= 1, got {n}x{d}")
        if not np.all(np.isfinite(values)):
            raise ValueError("values must be finite")
        if labels.shape != (n,):
            raise ValueError("labels must be a length-n vector")
        if len(names) < 1:
            raise ValueError("at least one class name is required")
        if len(set(names)) != len(names):
            raise ValueError("class names must be unique")
        for name in names:
            if name == "":
                raise ValueError("class names must be nonempty")
            if any(ch in name for ch in _FORBIDDEN_IN_NAME):
                raise ValueError(f"class name {name!r} contains a separator character")
            if len(name.encode("utf-8")) > 0xFFFF:
                raise ValueError("class name exceeds the 64 KiB format limit")
        if labels.min() < 0 or labels.max() >= len(names):
            raise ValueError("label index out of range")
        values.flags.writeable = False
        labels.flags.writeable = False
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "labels", labels)
        object.__setattr__(self, "class_names", names)

    @property
    def n(self) -> int:
        return self.values.shape[0]

    @property
    def d(self) -> int:
        return self.values.shape[1]

    def class_counts(self) -> dict[str, int]:
        counts = np.bincount(self.labels, minlength=len(self.class_names))
        return {name: int(c) for name, c in zip(self.class_names, counts)}


def _expected_header(d: int) -> str:
    return "label," + ",".join(f"f{i}" for i in range(d))


def load_csv(path) -> FeatureMatrix:
    """Parse a labeled CSV feature file.

    Raises MissingFile, HeaderMismatch, RaggedRow, or NonFiniteValue; a file
    with a header but no data rows reports RaggedRow(1).
    """
    path = Path(path)
    if not path.exists():
        raise MissingFile(f"no such file: {path}")
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise IoFailure(f"cannot read {path}: {exc}") from exc

    lines = text.split("\n")
    if lines and lines[-1] == "":
        lines.pop()
    lines = [line[:-1] if line.endswith("\r") else line for line in lines]
    if not lines:
        raise HeaderMismatch(f"{path}: empty file")

    header = lines[0].split(",")
    d = len(header) - 1
    if d < 1 or header != _expected_header(d).split(","):
        raise HeaderMismatch(f"{path}: expected header 'label,f0,...', got {lines[0]!r}")
    if len(lines) < 2:
        raise RaggedRow(1, f"{path}: no data rows")

    raw_labels: list[str] = []
    values = np.empty((len(lines) - 1, d), dtype=np.float64)
    for r, line in enumerate(lines[1:], start=1):
        parts = line.split(",")
        if len(parts) != d + 1:
            raise RaggedRow(r, f"{path}: row {r} has {len(parts)} fields, expected {d + 1}")
        raw_labels.append(parts[0])
        for c, token in enumerate(parts[1:]):
            try:
                v = float(token)
            except ValueError:
                raise NonFiniteValue(r, c, f"{path}: row {r}, column {c}: {token!r}") from None
            if not np.isfinite(v):
                raise NonFiniteValue(r, c, f"{path}: row {r}, column {c}: {token!r}")
            values[r - 1, c] = v

    names: list[str] = []
    index: dict[str, int] = {}
    labels = np.empty(len(raw_labels), dtype=np.int64)
    for i, name in enumerate(raw_labels):
        if name not in index:
            index[name] = len(names)
            names.append(name)
        labels[i] = index[name]
    return FeatureMatrix(values.astype(np.float32), labels, tuple(names))


def save_csv(m: FeatureMatrix, path) -> None:
    """Write `m` so that load_csv reparses it with bitwise-equal values."""
    rows = [_expected_header(m.d)]
    for i in range(m.n):
        cells = [m.class_names[m.labels[i]]]
        cells.extend(format(float(v), ".9g") for v in m.values[i])
        rows.append(",".join(cells))
    try:
        with Path(path).open("w", encoding="utf-8", newline="\n") as fh:
            fh.write("\n".join(rows) + "\n")
    except OSError as exc:
        raise IoFailure(f"cannot write {path}: {exc}") from exc


def load_binary(path) -> FeatureMatrix:
    """Parse a `.fmx` file (layout in the module docstring)."""
    path = Path(path)
    if not path.exists():
        raise MissingFile(f"no such file: {path}")
    try:
        buf = path.read_bytes()
    except OSError as exc:
        raise IoFailure(f"cannot read {path}: {exc}") from exc

    if buf[:4] != _MAGIC:
        raise BadMagic(f"{path}: expected magic {_MAGIC!r}, got {buf[:4]!r}")
    off = 4

    def take(count: int, what: str) -> int:
        nonlocal off
        if off + count > len(buf):
            raise TruncatedPayload(f"{path}: truncated while reading {what}")
        off += count
        return off - count

    n, d, k = struct.unpack_from("<III", buf, take(12, "header counts"))
    if n < 1 or d < 1 or k < 1:
        raise TruncatedPayload(f"{path}: impossible header counts n={n} d={d} k={k}")
    names = []
    for i in range(k):
        (ln,) = struct.unpack_from("<H", buf, take(2, f"class name {i} length"))
        start = take(ln, f"class name {i}")
        names.append(buf[start:start + ln].decode("utf-8"))
    labels = np.frombuffer(buf, dtype="<u4", count=n, offset=take(4 * n, "labels")).astype(np.int64)
    if labels.max() >= k:
        raise LabelIndexOutOfRange(f"{path}: label index {int(labels.max())} >= class count {k}")
    values = np.frombuffer(buf, dtype="<f4", count=n * d, offset=take(4 * n * d, "values"))
    if off != len(buf):
        raise TruncatedPayload(f"{path}: {len(buf) - off} trailing bytes")
    values = values.reshape(n, d)
    bad = np.argwhere(~np.isfinite(values))
    if bad.size:
        raise NonFiniteValue(int(bad[0, 0]) + 1, int(bad[0, 1]), f"{path}: non-finite stored value")
    return FeatureMatrix(values.copy(), labels, tuple(names))


def save_binary(m: FeatureMatrix, path) -> None:
    parts = [_MAGIC, struct.pack("<III", m.n, m.d, len(m.class_names))]
    for name in m.class_names:
        raw = name.encode("utf-8")
        parts.append(struct.pack("<H", len(raw)))
        parts.append(raw)
    parts.append(m.labels.astype("<u4").tobytes())
    parts.append(np.ascontiguousarray(m.values, dtype="<f4").tobytes())
    try:
        Path(path).write_bytes(b"".join(parts))
    except OSError as exc:
        raise IoFailure(f"cannot write {path}: {exc}") from exc


def load_matrix(path) -> FeatureMatrix:
    """Load either format, sniffing the binary magic."""
    path = Path(path)
    if not path.exists():
        raise MissingFile(f"no such file: {path}")
    try:
        with path.open("rb") as fh:
            head = fh.read(4)
    except OSError as exc:
        raise IoFailure(f"cannot read {path}: {exc}") from exc
    return load_binary(path) if head == _MAGIC else load_csv(path)


def save_matrix(m: FeatureMatrix, path, fmt: str | None = None) -> None:
    """Save in `fmt` ("csv" or "fmx"); default chosen from the path suffix."""
    if fmt is None:
        fmt = "csv" if str(path).lower().endswith(".csv") else "fmx"
    if fmt == "csv":
        save_csv(m, path)
    elif fmt == "fmx":
        save_binary(m, path)
    else:
        raise ValueError(f"unknown format {fmt!r}")


# --- synthetic data -----------------------------------------------------------

@dataclass(frozen=True)
class SynthSpec:
    """Recipe for a synthetic labeled matrix; generation is a pure function
    of the fields. d = informative_dims + noise_dims.
    """

    class_count: int
    informative_dims: int
    noise_dims: int
    samples_per_class: int
    cluster_spread: float
    centroid_separation: float
    seed: int

    def __post_init__(self):
        if self.class_count < 1:
            raise InvalidSpec("class_count must be >= 1")
        if self.informative_dims < 1:
            raise InvalidSpec("informative_dims must be >= 1")
        if self.noise_dims < 0:
            raise InvalidSpec("noise_dims must be >= 0")
        if self.samples_per_class < 1:
            raise InvalidSpec("samples_per_class must be >= 1")
        # Zero spread is allowed: it collapses each class onto its center,
        # which the degenerate-geometry tests rely on.
        if not np.isfinite(self.cluster_spread) or self.cluster_spread < 0:
            raise InvalidSpec("cluster_spread must be a finite nonnegative real")
        if not np.isfinite(self.centroid_separation) or self.centroid_separation <= 0:
            raise InvalidSpec("centroid_separation must be a finite positive real")
        if not 0 <= int(self.seed) < 2**64:
            raise InvalidSpec("seed must fit in 64 unsigned bits")


_CENTER_ENTROPY = 0x9E3779B97F4A7C15  # fixed, so centers ignore the sample seed


def class_centers(spec: SynthSpec) -> np.ndarray:
    """Class centers in the informative subspace, (class_count, informative_dims).

    Centers depend only on the geometry fields (class_count, informative_dims,
    centroid_separation), never on `seed` — specs differing only by seed
    sample the same class layout, which is what train/calibration/test splits
    need. Directions are drawn from a fixed-entropy RNG and scaled so the
    minimum pairwise distance equals centroid_separation; every informative
    coordinate carries class signal. Collinear fallback covers the 1-D and
    coincident-direction cases.
    """
    k, p = spec.class_count, spec.informative_dims
    if k == 1:
        return np.zeros((1, p))
    rng = np.random.default_rng(np.random.SeedSequence([_CENTER_ENTROPY, k, p]))
    u = rng.standard_normal((k, p))
    u /= np.linalg.norm(u, axis=1, keepdims=True)
    diff = u[:, None, :] - u[None, :, :]
    dist = np.sqrt((diff * diff).sum(axis=2))
    min_pair = dist[np.triu_indices(k, 1)].min()
    if p == 1 or min_pair < 1e-9:
        centers = np.zeros((k, p))
        centers[:, 0] = np.arange(k) * spec.centroid_separation
        return centers
    return u * (spec.centroid_separation / min_pair)


def synthesize(spec: SynthSpec) -> FeatureMatrix:
    """Generate the matrix described by `spec`.

    Informative columns come first: class c's rows are an isotropic Gaussian
    (std = cluster_spread) around class_centers(spec)[c]. Noise columns
    follow, the first ceil(noise_dims/2) constant 1.0 and the rest uniform on
    [0, centroid_separation), independent of the label. Deterministic in seed.
    """
    k, p = spec.class_count, spec.informative_dims
    npc = spec.samples_per_class
    n = k * npc
    d = p + spec.noise_dims
    centers = class_centers(spec)

    values = np.empty((n, d), dtype=np.float64)
    labels = np.repeat(np.arange(k, dtype=np.int64), npc)
    sample_rng = np.random.default_rng(np.random.SeedSequence([int(spec.seed), 1]))
    for c in range(k):
        block = slice(c * npc, (c + 1) * npc)
        values[block, :p] = centers[c] + spec.cluster_spread * sample_rng.standard_normal((npc, p))

    n_const = spec.noise_dims - spec.noise_dims // 2
    values[:, p:p + n_const] = 1.0
    n_unif = spec.noise_dims // 2
    if n_unif:
        noise_rng = np.random.default_rng(np.random.SeedSequence([int(spec.seed), 2]))
        values[:, p + n_const:] = noise_rng.uniform(0.0, spec.centroid_separation, (n, n_unif))

    names = tuple(f"c{i}" for i in range(k))
    return FeatureMatrix(values.astype(np.float32), labels, names)
