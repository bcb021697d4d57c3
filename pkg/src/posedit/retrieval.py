"""Action-pose database indexing and cosine-similarity retrieval.

The database is small by design (tens of labeled clips), so retrieval is an
exhaustive scan: every query computes the cosine score against every entry and
sorts descending.  Ties are broken by database insertion order, which makes
rankings fully deterministic and easy to reproduce in tests.

Embeddings arrive from files; this module never computes one.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np

from .errors import DatabaseError, GeometryError, ParseError, ShapeError


@dataclass(frozen=True)
class EmbeddingVector:
    values: tuple[float, ...]

    def __post_init__(self):
        object.__setattr__(self, "values", tuple(float(v) for v in self.values))
        if not self.values:
            raise ShapeError("embedding must have at least one component")
        for i, v in enumerate(self.values):
            if not math.isfinite(v):
                raise ValueError(f"embedding component {i} is not finite")

    @property
    def dim(self) -> int:
        return len(self.values)


@dataclass(frozen=True)
class PoseDbEntry:
    """One labeled action clip: id, human-readable label, label embedding,
    and the path of its pose video."""

    entry_id: str
    label: str
    embedding: EmbeddingVector
    pose_video_path: str


@dataclass(frozen=True)
class PoseDatabase:
    entries: tuple[PoseDbEntry, ...]
    dim: int

    def __post_init__(self):
        object.__setattr__(self, "entries", tuple(self.entries))

    def __len__(self) -> int:
        return len(self.entries)


def cosine(a: EmbeddingVector, b: EmbeddingVector) -> float:
    """dot(a, b) / (|a| * |b|), defined only for nonzero vectors."""
    if a.dim != b.dim:
        raise ShapeError(f"dimension mismatch: {a.dim} vs {b.dim}")
    na = math.sqrt(sum(v * v for v in a.values))
    nb = math.sqrt(sum(v * v for v in b.values))
    if na == 0.0 or nb == 0.0:
        raise GeometryError("cosine is undefined for a zero vector")
    return sum(x * y for x, y in zip(a.values, b.values)) / (na * nb)


def build_index(entries) -> PoseDatabase:
    """Validate entries and freeze them into a queryable database.

    Entry order is preserved; it defines the tie-break order for queries.
    """
    entries = tuple(entries)
    if not entries:
        raise DatabaseError("database must contain at least one entry")
    dim = entries[0].embedding.dim
    seen = set()
    for e in entries:
        if e.embedding.dim != dim:
            raise DatabaseError(
                f"entry {e.entry_id!r} has embedding dim {e.embedding.dim}, expected {dim}"
            )
        if e.entry_id in seen:
            raise DatabaseError(f"duplicate entry_id {e.entry_id!r}")
        seen.add(e.entry_id)
        if all(v == 0.0 for v in e.embedding.values):
            raise DatabaseError(f"entry {e.entry_id!r} has an all-zero embedding")
    return PoseDatabase(entries=entries, dim=dim)


def query(db: PoseDatabase, q: EmbeddingVector, k: int) -> list[tuple[str, float]]:
    """Top-k entries by descending cosine score against ``q``.

    Scores are reported at full precision.  Equal scores keep database
    insertion order (stable sort on the negated score).
    """
    if q.dim != db.dim:
        raise DatabaseError(f"query dim {q.dim} does not match database dim {db.dim}")
    if all(v == 0.0 for v in q.values):
        raise DatabaseError("query embedding must not be the zero vector")
    if not 1 <= k <= len(db):
        raise DatabaseError(f"k must be in [1, {len(db)}], got {k}")

    scores = np.array([cosine(e.embedding, q) for e in db.entries])
    order = np.argsort(-scores, kind="stable")
    return [(db.entries[i].entry_id, float(scores[i])) for i in order[:k]]


# --- manifest parsing ----------------------------------------------------------


def _reject_constant(name):
    raise ParseError(f"non-finite number {name!r} is not allowed")


def embedding_from_node(node, path: str = "$") -> EmbeddingVector:
    """Validate an already-parsed ``{"dim": D, "values": [reals]}`` node."""
    if not isinstance(node, dict):
        raise ParseError(f"{path}: expected an object")
    for key in node:
        if key not in {"dim", "values"}:
            raise ParseError(f"{path}: unexpected field {key!r}")
    if "dim" not in node or "values" not in node:
        raise ParseError(f"{path}: embedding needs both 'dim' and 'values'")
    dim = node["dim"]
    if isinstance(dim, bool) or not isinstance(dim, int) or dim < 1:
        raise ParseError(f"{path}.dim: expected a positive integer, got {dim!r}")
    values = node["values"]
    if not isinstance(values, list):
        raise ParseError(f"{path}.values: expected an array")
    if len(values) != dim:
        raise ParseError(
            f"{path}.values: length {len(values)} does not match dim {dim}"
        )
    out = []
    for i, v in enumerate(values):
        if isinstance(v, bool) or not isinstance(v, (int, float)):
            raise ParseError(f"{path}.values[{i}]: expected a number, got {v!r}")
        if not math.isfinite(float(v)):
            raise ParseError(f"{path}.values[{i}]: number must be finite")
        out.append(float(v))
    return EmbeddingVector(values=tuple(out))


def parse_embedding(text: str) -> EmbeddingVector:
    """Parse a query-embedding document: ``{"dim": D, "values": [reals]}``."""
    try:
        doc = json.loads(text, parse_constant=_reject_constant)
    except json.JSONDecodeError as exc:
        raise ParseError(f"invalid JSON: {exc}") from exc
    return embedding_from_node(doc)


def parse_db_manifest(text: str) -> list[PoseDbEntry]:
    """Parse the database manifest: an array of entry objects.

    Each entry is ``{"entry_id", "label", "embedding": [reals],
    "pose_video_path"}``.  Pose-video paths are kept verbatim; callers resolve
    them relative to the manifest's directory.
    """
    try:
        doc = json.loads(text, parse_constant=_reject_constant)
    except json.JSONDecodeError as exc:
        raise ParseError(f"invalid JSON: {exc}") from exc
    if not isinstance(doc, list):
        raise ParseError("$: expected an array of entries")
    if not doc:
        raise ParseError("$: database manifest must not be empty")
    entries = []
    for i, node in enumerate(doc):
        path = f"$[{i}]"
        if not isinstance(node, dict):
            raise ParseError(f"{path}: expected an object")
        allowed = {"entry_id", "label", "embedding", "pose_video_path"}
        for key in node:
            if key not in allowed:
                raise ParseError(f"{path}: unexpected field {key!r}")
        for key in allowed:
            if key not in node:
                raise ParseError(f"{path}: missing field {key!r}")
        entry_id = node["entry_id"]
        label = node["label"]
        video_path = node["pose_video_path"]
        if not isinstance(entry_id, str) or not entry_id:
            raise ParseError(f"{path}.entry_id: expected a non-empty string")
        if not isinstance(label, str) or not label:
            raise ParseError(f"{path}.label: expected a non-empty string")
        if not isinstance(video_path, str) or not video_path:
            raise ParseError(f"{path}.pose_video_path: expected a non-empty string")
        emb = node["embedding"]
        if not isinstance(emb, list) or not emb:
            raise ParseError(f"{path}.embedding: expected a non-empty array")
        values = []
        for j, v in enumerate(emb):
            if isinstance(v, bool) or not isinstance(v, (int, float)):
                raise ParseError(f"{path}.embedding[{j}]: expected a number, got {v!r}")
            if not math.isfinite(float(v)):
                raise ParseError(f"{path}.embedding[{j}]: number must be finite")
            values.append(float(v))
        entries.append(
            PoseDbEntry(
                entry_id=entry_id,
                label=label,
                embedding=EmbeddingVector(values=tuple(values)),
                pose_video_path=video_path,
            )
        )
    return entries
