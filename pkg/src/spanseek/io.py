"""On-disk formats: feature matrices, similarity tracks, manifests, documents.

Binary matrix layout (little-endian throughout):

    bytes 0-3   magic  b"P2SF"
    bytes 4-7   uint32 format version (currently 1)
    bytes 8-11  uint32 row count T
    bytes 12-15 uint32 dimension D
    then        T * D float32 values, row-major

Similarity tracks are the same format with D = 1; a plain text file with
one value per line is accepted interchangeably. Manifests and result
documents are JSON with a schema_version field; file paths inside a
manifest resolve relative to the manifest's directory.
"""

from __future__ import annotations

import hashlib
import json
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

MATRIX_MAGIC = b"P2SF"
MATRIX_VERSION = 1
MANIFEST_SCHEMA_VERSION = 1

_HEADER = struct.Struct("<4sIII")


def write_matrix(path: str | Path, array: np.ndarray) -> None:
    """Write a T x D float matrix in the binary layout above."""
    arr = np.asarray(array, dtype=np.float32)
    if arr.ndim == 1:
        arr = arr[:, None]
    if arr.ndim != 2 or arr.shape[0] < 1 or arr.shape[1] < 1:
        raise ValueError("matrix must be non-empty and at most 2-D")
    rows, dim = arr.shape
    with open(path, "wb") as handle:
        handle.write(_HEADER.pack(MATRIX_MAGIC, MATRIX_VERSION, rows, dim))
        handle.write(np.ascontiguousarray(arr).tobytes())


def read_matrix(path: str | Path) -> np.ndarray:
    """Read a binary matrix; returns float32, shape (T, D)."""
    with open(path, "rb") as handle:
        header = handle.read(_HEADER.size)
        if len(header) != _HEADER.size:
            raise ValueError(f"{path}: truncated header")
        magic, version, rows, dim = _HEADER.unpack(header)
        if magic != MATRIX_MAGIC:
            raise ValueError(f"{path}: bad magic {magic!r}")
        if version != MATRIX_VERSION:
            raise ValueError(f"{path}: unsupported format version {version}")
        payload = handle.read(4 * rows * dim)
    if len(payload) != 4 * rows * dim:
        raise ValueError(f"{path}: truncated payload")
    return np.frombuffer(payload, dtype="<f4").reshape(rows, dim).copy()


def write_similarity(path: str | Path, values: np.ndarray) -> None:
    write_matrix(path, np.asarray(values, dtype=np.float32).reshape(-1, 1))


def read_similarity(path: str | Path) -> np.ndarray:
    """Load a similarity track from binary or one-column text, as float64."""
    with open(path, "rb") as handle:
        head = handle.read(4)
    if head == MATRIX_MAGIC:
        mat = read_matrix(path)
        if mat.shape[1] != 1:
            raise ValueError(f"{path}: similarity track must have D=1, got D={mat.shape[1]}")
        return mat[:, 0].astype(np.float64)
    values = np.loadtxt(path, dtype=np.float64, comments="#", ndmin=1)
    if values.ndim != 1:
        raise ValueError(f"{path}: text similarity file must be one column")
    return values


@dataclass(frozen=True)
class QueryRecord:
    """One manifest entry: a query, its video, and where its signals live.

    Exactly one source kind is used per record: ``similarity`` maps channel
    names (original / sub_a / sub_b) to track files, ``embeddings`` points
    at a frame matrix plus per-channel query vectors.
    """

    query_id: str
    video_id: str
    query_text: str = ""
    sub_queries: tuple[str, str] | None = None
    ground_truth: tuple[float, float] | None = None
    similarity: dict[str, str] | None = None
    embeddings: dict[str, str] | None = None

    def __post_init__(self) -> None:
        if not self.query_id:
            raise ValueError("query_id must be non-empty")
        if (self.similarity is None) == (self.embeddings is None):
            raise ValueError(
                f"{self.query_id}: exactly one of similarity/embeddings must be given"
            )
        if self.ground_truth is not None and not self.ground_truth[1] > self.ground_truth[0]:
            raise ValueError(f"{self.query_id}: ground truth must have end > start")


@dataclass(frozen=True)
class Manifest:
    """A run's query list plus the shared frame rate."""

    fps: float
    queries: tuple[QueryRecord, ...]
    root: Path | None = None

    def __post_init__(self) -> None:
        if not self.fps > 0:
            raise ValueError(f"fps must be positive, got {self.fps}")
        seen = set()
        for record in self.queries:
            if record.query_id in seen:
                raise ValueError(f"duplicate query_id {record.query_id!r}")
            seen.add(record.query_id)

    def resolve(self, path: str) -> Path:
        p = Path(path)
        if p.is_absolute() or self.root is None:
            return p
        return self.root / p


def _record_to_dict(record: QueryRecord) -> dict:
    out: dict = {"query_id": record.query_id, "video_id": record.video_id}
    if record.query_text:
        out["query_text"] = record.query_text
    if record.sub_queries is not None:
        out["sub_queries"] = list(record.sub_queries)
    if record.ground_truth is not None:
        out["ground_truth"] = list(record.ground_truth)
    if record.similarity is not None:
        out["similarity"] = dict(record.similarity)
    if record.embeddings is not None:
        out["embeddings"] = dict(record.embeddings)
    return out


def _record_from_dict(data: dict) -> QueryRecord:
    sub = data.get("sub_queries")
    gt = data.get("ground_truth")
    return QueryRecord(
        query_id=data["query_id"],
        video_id=data.get("video_id", ""),
        query_text=data.get("query_text", ""),
        sub_queries=tuple(sub) if sub else None,
        ground_truth=(float(gt[0]), float(gt[1])) if gt else None,
        similarity=data.get("similarity"),
        embeddings=data.get("embeddings"),
    )


def save_manifest(manifest: Manifest, path: str | Path) -> None:
    doc = {
        "schema_version": MANIFEST_SCHEMA_VERSION,
        "fps": manifest.fps,
        "queries": [_record_to_dict(r) for r in manifest.queries],
    }
    Path(path).write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n", encoding="utf-8")


def load_manifest(path: str | Path) -> Manifest:
    path = Path(path)
    data = json.loads(path.read_text(encoding="utf-8"))
    version = data.get("schema_version")
    if version != MANIFEST_SCHEMA_VERSION:
        raise ValueError(f"{path}: unsupported manifest schema_version {version}")
    records = tuple(_record_from_dict(entry) for entry in data["queries"])
    return Manifest(fps=float(data["fps"]), queries=records, root=path.parent)


def canonical_json(data) -> str:
    """Stable serialization used for fingerprints and document output."""
    return json.dumps(data, indent=2, sort_keys=True)


def fingerprint(data) -> str:
    return hashlib.sha256(canonical_json(data).encode("utf-8")).hexdigest()


def write_document(document: dict, path: str | Path) -> None:
    Path(path).write_text(canonical_json(document) + "\n", encoding="utf-8")


def load_document(path: str | Path) -> dict:
    return json.loads(Path(path).read_text(encoding="utf-8"))
