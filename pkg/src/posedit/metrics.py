"""Evaluation metrics over ingested video and prompt embeddings.

Three numbers summarize an edit:

* ``vid_acc``: fraction of cases whose edited clip is strictly closer (by
  cosine) to the target prompt than to the source prompt.  Ties fail.
* ``vid_con``: mean frame-wise cosine between the edited and source clips.
* ``gt_con``: the same mean against a ground-truth clip, when one exists.

Embeddings arrive as files produced elsewhere; every vector here is opaque.
The functions are pure, so per-case evaluation order never matters.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

from .errors import ParseError, ShapeError
from .retrieval import EmbeddingVector, cosine, embedding_from_node


@dataclass(frozen=True)
class VideoEmbeddingRecord:
    """Clip-level embedding plus one embedding per frame."""

    video_id: str
    video_embedding: EmbeddingVector
    frame_embeddings: tuple[EmbeddingVector, ...]

    def __post_init__(self):
        object.__setattr__(self, "frame_embeddings", tuple(self.frame_embeddings))
        if not self.frame_embeddings:
            raise ShapeError(f"record {self.video_id!r} has no frame embeddings")
        dim = self.frame_embeddings[0].dim
        for i, e in enumerate(self.frame_embeddings):
            if e.dim != dim:
                raise ShapeError(
                    f"record {self.video_id!r}: frame embedding {i} has dim {e.dim}, "
                    f"expected {dim}"
                )

    @property
    def frame_count(self) -> int:
        return len(self.frame_embeddings)


@dataclass(frozen=True)
class MetricCase:
    case_id: str
    edited: VideoEmbeddingRecord
    source: VideoEmbeddingRecord
    target_prompt_embedding: EmbeddingVector
    source_prompt_embedding: EmbeddingVector
    ground_truth: VideoEmbeddingRecord | None = None

    def __post_init__(self):
        if self.edited.frame_count != self.source.frame_count:
            raise ShapeError(
                f"case {self.case_id!r}: edited has {self.edited.frame_count} frames, "
                f"source has {self.source.frame_count}"
            )
        if (
            self.ground_truth is not None
            and self.ground_truth.frame_count != self.edited.frame_count
        ):
            raise ShapeError(
                f"case {self.case_id!r}: ground truth has "
                f"{self.ground_truth.frame_count} frames, edited has "
                f"{self.edited.frame_count}"
            )


def prompt_hit(case: MetricCase) -> bool:
    """True when the edited clip is strictly closer to the target prompt."""
    target = cosine(case.edited.video_embedding, case.target_prompt_embedding)
    source = cosine(case.edited.video_embedding, case.source_prompt_embedding)
    return target > source


def vid_acc(cases) -> float:
    """Fraction of cases passing :func:`prompt_hit`; equal similarities fail."""
    cases = list(cases)
    if not cases:
        raise ValueError("vid_acc needs at least one case")
    return sum(1 for c in cases if prompt_hit(c)) / len(cases)


def _mean_frame_cosine(a: VideoEmbeddingRecord, b: VideoEmbeddingRecord) -> float:
    if a.frame_count != b.frame_count:
        raise ShapeError(
            f"frame count mismatch: {a.video_id!r} has {a.frame_count}, "
            f"{b.video_id!r} has {b.frame_count}"
        )
    total = 0.0
    for ea, eb in zip(a.frame_embeddings, b.frame_embeddings):
        total += cosine(ea, eb)
    return total / a.frame_count


def vid_con(edited: VideoEmbeddingRecord, source: VideoEmbeddingRecord) -> float:
    """Mean frame-wise cosine between edited and source frame embeddings."""
    return _mean_frame_cosine(edited, source)


def gt_con(edited: VideoEmbeddingRecord, ground_truth: VideoEmbeddingRecord | None) -> float:
    """Mean frame-wise cosine against the ground-truth clip."""
    if ground_truth is None:
        raise ValueError("gt_con requires a ground-truth record")
    return _mean_frame_cosine(edited, ground_truth)


# --- manifest parsing -------------------------------------------------------------


def _reject_constant(name):
    raise ParseError(f"non-finite number {name!r} is not allowed")


def _slot(node, path, read_file):
    """An embedding or record slot is either inline or ``{"path": "..."}``."""
    if isinstance(node, dict) and set(node) == {"path"}:
        ref = node["path"]
        if not isinstance(ref, str) or not ref:
            raise ParseError(f"{path}.path: expected a non-empty string")
        try:
            text = read_file(ref)
        except OSError as exc:
            raise ParseError(f"{path}.path: cannot read {ref!r}: {exc}") from exc
        try:
            return json.loads(text, parse_constant=_reject_constant)
        except json.JSONDecodeError as exc:
            raise ParseError(f"{path}.path: invalid JSON in {ref!r}: {exc}") from exc
    return node


def _record_from_node(node, path) -> VideoEmbeddingRecord:
    if not isinstance(node, dict):
        raise ParseError(f"{path}: expected an object")
    allowed = {"video_id", "video_embedding", "frame_embeddings"}
    for key in node:
        if key not in allowed:
            raise ParseError(f"{path}: unexpected field {key!r}")
    for key in allowed:
        if key not in node:
            raise ParseError(f"{path}: missing field {key!r}")
    video_id = node["video_id"]
    if not isinstance(video_id, str) or not video_id:
        raise ParseError(f"{path}.video_id: expected a non-empty string")
    video_embedding = embedding_from_node(node["video_embedding"], f"{path}.video_embedding")
    frames_node = node["frame_embeddings"]
    if not isinstance(frames_node, list) or not frames_node:
        raise ParseError(f"{path}.frame_embeddings: expected a non-empty array")
    frames = tuple(
        embedding_from_node(fn, f"{path}.frame_embeddings[{i}]")
        for i, fn in enumerate(frames_node)
    )
    try:
        return VideoEmbeddingRecord(
            video_id=video_id, video_embedding=video_embedding, frame_embeddings=frames
        )
    except ShapeError as exc:
        raise ParseError(f"{path}: {exc}") from exc


def parse_metric_cases(text: str, read_file) -> list[MetricCase]:
    """Parse a metric manifest: an array of case objects.

    Each case is ``{"case_id", "edited", "source", "target_prompt_embedding",
    "source_prompt_embedding", "ground_truth"?}``.  Record and embedding slots
    may be inline or ``{"path": "relative/file.json"}``; ``read_file`` maps a
    path string to its text (the CLI resolves relative to the manifest).
    """
    try:
        doc = json.loads(text, parse_constant=_reject_constant)
    except json.JSONDecodeError as exc:
        raise ParseError(f"invalid JSON: {exc}") from exc
    if not isinstance(doc, list) or not doc:
        raise ParseError("$: expected a non-empty array of cases")

    cases = []
    seen = set()
    for i, node in enumerate(doc):
        path = f"$[{i}]"
        if not isinstance(node, dict):
            raise ParseError(f"{path}: expected an object")
        allowed = {
            "case_id",
            "edited",
            "source",
            "target_prompt_embedding",
            "source_prompt_embedding",
            "ground_truth",
        }
        for key in node:
            if key not in allowed:
                raise ParseError(f"{path}: unexpected field {key!r}")
        for key in allowed - {"ground_truth"}:
            if key not in node:
                raise ParseError(f"{path}: missing field {key!r}")
        case_id = node["case_id"]
        if not isinstance(case_id, str) or not case_id:
            raise ParseError(f"{path}.case_id: expected a non-empty string")
        if case_id in seen:
            raise ParseError(f"{path}.case_id: duplicate id {case_id!r}")
        seen.add(case_id)

        edited = _record_from_node(_slot(node["edited"], f"{path}.edited", read_file),
                                   f"{path}.edited")
        source = _record_from_node(_slot(node["source"], f"{path}.source", read_file),
                                   f"{path}.source")
        target_pe = embedding_from_node(
            _slot(node["target_prompt_embedding"], f"{path}.target_prompt_embedding", read_file),
            f"{path}.target_prompt_embedding",
        )
        source_pe = embedding_from_node(
            _slot(node["source_prompt_embedding"], f"{path}.source_prompt_embedding", read_file),
            f"{path}.source_prompt_embedding",
        )
        ground_truth = None
        if "ground_truth" in node:
            ground_truth = _record_from_node(
                _slot(node["ground_truth"], f"{path}.ground_truth", read_file),
                f"{path}.ground_truth",
            )
        try:
            cases.append(
                MetricCase(
                    case_id=case_id,
                    edited=edited,
                    source=source,
                    target_prompt_embedding=target_pe,
                    source_prompt_embedding=source_pe,
                    ground_truth=ground_truth,
                )
            )
        except ShapeError as exc:
            raise ParseError(f"{path}: {exc}") from exc
    return cases
