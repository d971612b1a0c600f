"""Embedding backends and the AEMB1 on-disk matrix exchange format.

AEMB1 layout: magic b"AEMB1\\n", little-endian u32 dim, u64 count, then
count * dim float32 values row-major. A sidecar JSONL manifest
(``<path>.manifest.jsonl``) records {"window_id": ..., "row": k} per row.
"""
from __future__ import annotations

import json
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .dsp import MelSpectrogram
from .errors import FormatError, NotFoundError

MAGIC = b"AEMB1\n"

BACKEND_KINDS = ("baseline-flatten", "autoencoder", "external")


@dataclass
class EmbeddingMatrix:
    values: np.ndarray  # (N, dim) float32
    window_ids: list[str]
    backend_tag: str = "baseline-flatten"

    def __post_init__(self):
        self.values = np.ascontiguousarray(self.values, dtype=np.float32)
        if self.values.ndim != 2:
            raise ValueError(f"expected 2-D matrix, got shape {self.values.shape}")
        if len(self.window_ids) != self.values.shape[0]:
            raise ValueError(
                f"{len(self.window_ids)} window ids for {self.values.shape[0]} rows"
            )

    @property
    def dim(self) -> int:
        return self.values.shape[1]

    def __len__(self) -> int:
        return self.values.shape[0]


@dataclass(frozen=True)
class BackendSpec:
    kind: str  # one of BACKEND_KINDS
    checkpoint: str | None = None  # autoencoder weights path
    external_path: str | None = None  # imported AEMB1 file

    def __post_init__(self):
        if self.kind not in BACKEND_KINDS:
            raise ValueError(f"unknown backend kind {self.kind!r}")


def embed_baseline(spec: MelSpectrogram) -> np.ndarray:
    """Row-major flattening of the 100x100 image (d = 10000)."""
    return spec.values.reshape(-1).astype(np.float32)


def embed_batch(backend: BackendSpec, specs: list[MelSpectrogram]) -> EmbeddingMatrix:
    """One embedding row per spectrogram, in input order."""
    ids = [s.window_id for s in specs]
    if backend.kind == "baseline-flatten":
        rows = np.stack([embed_baseline(s) for s in specs]) if specs else np.empty((0, 10000))
        return EmbeddingMatrix(rows, ids, "baseline-flatten")
    if backend.kind == "autoencoder":
        from .autoenc import ConvAutoencoder, load_checkpoint

        model = load_checkpoint(backend.checkpoint)
        rows = model.encode_batch(np.stack([s.values for s in specs]))
        return EmbeddingMatrix(rows, ids, "autoencoder")
    # external: join imported rows by window_id
    imported = import_embeddings(backend.external_path)
    row_of = {wid: i for i, wid in enumerate(imported.window_ids)}
    missing = [wid for wid in ids if wid not in row_of]
    if missing:
        raise NotFoundError(
            f"external embedding file is missing {len(missing)} window ids: "
            + ", ".join(missing[:10])
        )
    rows = imported.values[[row_of[wid] for wid in ids]]
    return EmbeddingMatrix(rows, ids, "external")


def manifest_path(path) -> Path:
    return Path(str(path) + ".manifest.jsonl")


def export_embeddings(matrix: EmbeddingMatrix, path) -> None:
    path = Path(path)
    if not np.isfinite(matrix.values).all():
        raise ValueError("refusing to export non-finite embedding values")
    n, dim = matrix.values.shape
    with open(path, "wb") as f:
        f.write(MAGIC)
        f.write(struct.pack("<IQ", dim, n))
        f.write(matrix.values.astype("<f4").tobytes())
    with open(manifest_path(path), "w") as f:
        for i, wid in enumerate(matrix.window_ids):
            f.write(json.dumps({"window_id": wid, "row": i}) + "\n")


def import_embeddings(path, backend_tag: str = "external") -> EmbeddingMatrix:
    path = Path(path)
    data = path.read_bytes()
    if data[: len(MAGIC)] != MAGIC:
        raise FormatError(f"bad magic in {path}", offset=0)
    header_end = len(MAGIC) + 12
    if len(data) < header_end:
        raise FormatError(f"truncated header in {path}", offset=len(data))
    dim, n = struct.unpack("<IQ", data[len(MAGIC) : header_end])
    expected = header_end + 4 * dim * n
    if len(data) < expected:
        raise FormatError(
            f"truncated payload in {path}: expected {expected} bytes, have {len(data)}",
            offset=len(data),
        )
    values = np.frombuffer(data[header_end:expected], dtype="<f4").reshape(n, dim)

    mpath = manifest_path(path)
    if mpath.exists():
        ids = []
        with open(mpath) as f:
            for line in f:
                ids.append(json.loads(line)["window_id"])
        if len(ids) != n:
            raise FormatError(
                f"manifest {mpath} has {len(ids)} rows, matrix has {n}"
            )
    else:
        ids = [f"row{i}" for i in range(n)]
    return EmbeddingMatrix(values.copy(), ids, backend_tag)
