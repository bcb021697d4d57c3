"""Detection ingestion, detection-to-instance assignment, and pose replacement.

Detections (phrase + box + score) come from a file; each is matched to a pose
instance in the source clip's first frame by greedy intersection-over-union on
the instance's keypoint-derived box.  Every matched instance is then replaced,
frame by frame, with the retrieved action clip after similarity alignment onto
that instance's own first-frame keypoints, so multi-person edits stay local.
Unmatched people pass through bit-identically.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass

from .errors import ParseError, ShapeError
from .pose_model import (
    BoundingBox,
    PoseFrame,
    PoseInstance,
    PoseVideo,
    keypoint_bbox,
)
from .procrustes import (
    KeypointSet,
    SimilarityTransform2D,
    apply_transform,
    solve_similarity,
)

IOU_THRESHOLD_DEFAULT = 0.3


@dataclass(frozen=True)
class Detection:
    """A phrase-grounded box over the first frame, e.g. ("the girl", box, 0.93)."""

    phrase: str
    box: BoundingBox
    score: float

    def __post_init__(self):
        if not (math.isfinite(self.score) and 0.0 <= self.score <= 1.0):
            raise ValueError(f"score must be in [0, 1], got {self.score}")


@dataclass(frozen=True)
class DetectionSet:
    frame_index: int
    detections: tuple[Detection, ...]

    def __post_init__(self):
        object.__setattr__(self, "detections", tuple(self.detections))
        if self.frame_index < 0:
            raise ValueError("frame_index must be non-negative")


@dataclass(frozen=True)
class Assignment:
    """One-to-one partial matching between detections and instances.

    ``pairs`` holds (detection index, instance_id); no index or id repeats.
    """

    pairs: tuple[tuple[int, int], ...]
    unmatched_detections: tuple[int, ...]
    unmatched_instances: tuple[int, ...]

    def __post_init__(self):
        object.__setattr__(self, "pairs", tuple(tuple(p) for p in self.pairs))
        object.__setattr__(self, "unmatched_detections", tuple(self.unmatched_detections))
        object.__setattr__(self, "unmatched_instances", tuple(self.unmatched_instances))
        det_indices = [d for d, _ in self.pairs]
        inst_ids = [i for _, i in self.pairs]
        if len(set(det_indices)) != len(det_indices) or len(set(inst_ids)) != len(inst_ids):
            raise ValueError("a detection or instance appears in more than one pair")

    @property
    def matched_instance_ids(self) -> frozenset[int]:
        return frozenset(i for _, i in self.pairs)


def iou(a: BoundingBox, b: BoundingBox) -> float:
    """Intersection area over union area; 0 whenever the union is degenerate."""
    iw = min(a.x_max, b.x_max) - max(a.x_min, b.x_min)
    ih = min(a.y_max, b.y_max) - max(a.y_min, b.y_min)
    inter = max(0.0, iw) * max(0.0, ih)
    union = a.area + b.area - inter
    if union <= 0.0:
        return 0.0
    return inter / union


def assign_detections(
    dset: DetectionSet, frame: PoseFrame, threshold: float = IOU_THRESHOLD_DEFAULT
) -> Assignment:
    """Greedy highest-IoU matching between detections and frame instances.

    Repeatedly takes the globally best (detection, instance) pair with
    IoU >= threshold and removes both from play; equal IoU values resolve by
    the smaller (detection index, instance_id).  Instances without a visible
    keypoint cannot produce a box and make the frame unusable (error from
    :func:`keypoint_bbox` propagates).
    """
    boxes = {inst.instance_id: keypoint_bbox(inst) for inst in frame.instances}
    candidates = []
    for d_idx, det in enumerate(dset.detections):
        for inst in frame.instances:
            value = iou(det.box, boxes[inst.instance_id])
            if value >= threshold:
                candidates.append((value, d_idx, inst.instance_id))
    # sorted scan == repeated global-max extraction: skipped rows stay skipped
    candidates.sort(key=lambda c: (-c[0], c[1], c[2]))

    used_d, used_i, pairs = set(), set(), []
    for value, d_idx, inst_id in candidates:
        if d_idx in used_d or inst_id in used_i:
            continue
        used_d.add(d_idx)
        used_i.add(inst_id)
        pairs.append((d_idx, inst_id))
    return Assignment(
        pairs=tuple(pairs),
        unmatched_detections=tuple(
            i for i in range(len(dset.detections)) if i not in used_d
        ),
        unmatched_instances=tuple(
            inst.instance_id for inst in frame.instances if inst.instance_id not in used_i
        ),
    )


def resample_indices(src_len: int, dst_len: int) -> list[int]:
    """Nearest-index mapping of dst positions onto src positions.

    Position j of dst maps to round(j * (src_len-1) / (dst_len-1)) with .5
    rounding up; a single-frame side on either end collapses to index 0.
    """
    if src_len < 1 or dst_len < 1:
        raise ValueError("lengths must be positive")
    if src_len == 1 or dst_len == 1:
        return [0] * dst_len
    return [
        math.floor(j * (src_len - 1) / (dst_len - 1) + 0.5) for j in range(dst_len)
    ]


def resample_video(video: PoseVideo, n: int) -> PoseVideo:
    """Stretch or shrink ``video`` to ``n`` frames by nearest-index picking.

    Picked frames are renumbered 0..n-1 so the result stays a valid video
    even when a frame is repeated.  Same-length input is returned unchanged.
    """
    if not video.frames:
        raise ShapeError("cannot resample a video with no frames")
    if n == len(video.frames):
        return video
    picks = resample_indices(len(video.frames), n)
    frames = tuple(
        PoseFrame(frame_index=j, instances=video.frames[idx].instances)
        for j, idx in enumerate(picks)
    )
    return PoseVideo(
        width=video.width,
        height=video.height,
        skeleton=video.skeleton,
        frames=frames,
        label=video.label,
    )


def _single_instance_or_raise(video: PoseVideo) -> None:
    for frame in video.frames:
        if len(frame.instances) != 1:
            raise ShapeError(
                f"retrieved video must have exactly 1 instance per frame; "
                f"frame {frame.frame_index} has {len(frame.instances)}"
            )


def alignment_transforms(
    source: PoseVideo, assignment: Assignment, retrieved: PoseVideo
) -> dict[int, SimilarityTransform2D]:
    """Per matched instance: the similarity transform carrying the retrieved
    first-frame keypoints onto that instance's source first-frame keypoints."""
    if not assignment.pairs:
        return {}
    if not source.frames:
        raise ValueError("source video has no frames")
    if not retrieved.frames:
        raise ShapeError("retrieved video has no frames")
    _single_instance_or_raise(retrieved)
    first = source.frames[0]
    by_id = {inst.instance_id: inst for inst in first.instances}
    moving = KeypointSet.from_instance(retrieved.frames[0].instances[0])
    out = {}
    for _, inst_id in assignment.pairs:
        if inst_id not in by_id:
            raise ValueError(
                f"assignment names instance_id {inst_id}, not present in the source first frame"
            )
        fixed = KeypointSet.from_instance(by_id[inst_id])
        out[inst_id] = solve_similarity(fixed, moving)
    return out


def edit_pose_video(
    source: PoseVideo, assignment: Assignment, retrieved: PoseVideo
) -> PoseVideo:
    """Replace each matched instance with the aligned retrieved clip.

    Alignment is solved once per matched instance on first frames and applied
    to every retrieved frame; the retrieved clip is resampled to the source
    frame count by nearest index before substitution.  Instances outside the
    assignment keep their keypoints untouched, and the output always has the
    source's frame count and frame indices.
    """
    if not assignment.pairs:
        return source

    transforms = alignment_transforms(source, assignment, retrieved)
    replacement = {}
    for inst_id, tr in transforms.items():
        aligned = apply_transform(tr, retrieved)
        replacement[inst_id] = resample_video(aligned, len(source.frames))

    frames = []
    for k, frame in enumerate(source.frames):
        instances = []
        for inst in frame.instances:
            if inst.instance_id in replacement:
                donor = replacement[inst.instance_id].frames[k].instances[0]
                instances.append(
                    PoseInstance(instance_id=inst.instance_id, keypoints=donor.keypoints)
                )
            else:
                instances.append(inst)
        frames.append(PoseFrame(frame_index=frame.frame_index, instances=tuple(instances)))
    return PoseVideo(
        width=source.width,
        height=source.height,
        skeleton=source.skeleton,
        frames=tuple(frames),
        label=source.label,
    )


def out_of_bounds_detections(
    dset: DetectionSet, width: int, height: int
) -> tuple[int, ...]:
    """Indices of detections whose boxes stick outside [0,width] x [0,height]."""
    flagged = []
    for i, det in enumerate(dset.detections):
        b = det.box
        if b.x_min < 0.0 or b.y_min < 0.0 or b.x_max > width or b.y_max > height:
            flagged.append(i)
    return tuple(flagged)


# --- detection file parsing ----------------------------------------------------


def _reject_constant(name):
    raise ParseError(f"non-finite number {name!r} is not allowed")


def parse_detections(text: str) -> DetectionSet:
    """Parse a detection document.

    Schema: ``{"frame_index": int, "detections": [{"phrase": str,
    "box": [x_min, y_min, x_max, y_max], "score": real}]}``.  An empty
    detections array is valid (the pipeline then edits nobody).
    """
    try:
        doc = json.loads(text, parse_constant=_reject_constant)
    except json.JSONDecodeError as exc:
        raise ParseError(f"invalid JSON: {exc}") from exc
    if not isinstance(doc, dict):
        raise ParseError("$: expected an object")
    for key in doc:
        if key not in {"frame_index", "detections"}:
            raise ParseError(f"$: unexpected field {key!r}")
    if "frame_index" not in doc or "detections" not in doc:
        raise ParseError("$: needs 'frame_index' and 'detections'")
    fidx = doc["frame_index"]
    if isinstance(fidx, bool) or not isinstance(fidx, int) or fidx < 0:
        raise ParseError(f"frame_index: expected a non-negative integer, got {fidx!r}")
    dets_node = doc["detections"]
    if not isinstance(dets_node, list):
        raise ParseError("detections: expected an array")

    detections = []
    for i, node in enumerate(dets_node):
        path = f"detections[{i}]"
        if not isinstance(node, dict):
            raise ParseError(f"{path}: expected an object")
        for key in node:
            if key not in {"phrase", "box", "score"}:
                raise ParseError(f"{path}: unexpected field {key!r}")
        for key in ("phrase", "box", "score"):
            if key not in node:
                raise ParseError(f"{path}: missing field {key!r}")
        phrase = node["phrase"]
        if not isinstance(phrase, str) or not phrase:
            raise ParseError(f"{path}.phrase: expected a non-empty string")
        box_node = node["box"]
        if not isinstance(box_node, list) or len(box_node) != 4:
            raise ParseError(f"{path}.box: expected [x_min, y_min, x_max, y_max]")
        coords = []
        for j, v in enumerate(box_node):
            if isinstance(v, bool) or not isinstance(v, (int, float)):
                raise ParseError(f"{path}.box[{j}]: expected a number, got {v!r}")
            if not math.isfinite(float(v)):
                raise ParseError(f"{path}.box[{j}]: number must be finite")
            coords.append(float(v))
        if coords[2] < coords[0] or coords[3] < coords[1]:
            raise ParseError(
                f"{path}.box: extents must satisfy x_min <= x_max and y_min <= y_max"
            )
        score = node["score"]
        if isinstance(score, bool) or not isinstance(score, (int, float)):
            raise ParseError(f"{path}.score: expected a number, got {score!r}")
        score = float(score)
        if not (math.isfinite(score) and 0.0 <= score <= 1.0):
            raise ParseError(f"{path}.score: must be in [0, 1], got {score}")
        detections.append(
            Detection(
                phrase=phrase,
                box=BoundingBox(coords[0], coords[1], coords[2], coords[3]),
                score=score,
            )
        )
    return DetectionSet(frame_index=fidx, detections=tuple(detections))
