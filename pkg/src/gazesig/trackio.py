"""Canonical per-frame eye/gaze track file format (.gzt.jsonl).

A track file is JSON-Lines: line 1 is a header object with video_id, fps
and label; every following line is one frame with a "left" and a "right"
eye object. All 3D quantities are camera-space millimeters, areas are mm2,
colors are 8-bit sRGB.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, replace

from .errors import EmptyTrack, MalformedHeader, MalformedRecord

LABELS = ("real", "fake", "unknown")

_EYE_KEYS = (
    "eye_area", "iris_area", "pupil_area",
    "iris_rgb", "pupil_rgb",
    "pupil_center", "gaze_dir", "eye_center",
    "valid",
)


@dataclass(frozen=True)
class EyeState:
    """Per-eye measurements for a single frame."""

    eye_area: float
    iris_area: float
    pupil_area: float
    iris_rgb: tuple
    pupil_rgb: tuple
    pupil_center: tuple
    gaze_dir: tuple
    eye_center: tuple
    valid: bool = True


@dataclass(frozen=True)
class TrackRecord:
    frame_index: int
    timestamp_ms: float
    left: EyeState
    right: EyeState
    valid: bool = True


@dataclass(frozen=True)
class Track:
    video_id: str
    fps: float
    records: tuple
    label: str = "unknown"


def _is_vec3(v) -> bool:
    return (
        isinstance(v, (list, tuple))
        and len(v) == 3
        and all(isinstance(x, (int, float)) and not isinstance(x, bool) for x in v)
        and all(math.isfinite(x) for x in v)
    )


def _is_num(x) -> bool:
    return isinstance(x, (int, float)) and not isinstance(x, bool) and math.isfinite(x)


def _eye_semantically_valid(eye: EyeState) -> bool:
    if not (eye.eye_area >= 0 and eye.iris_area >= 0 and eye.pupil_area >= 0):
        return False
    if not (eye.pupil_area <= eye.iris_area <= eye.eye_area):
        return False
    for rgb in (eye.iris_rgb, eye.pupil_rgb):
        if not all(0 <= c <= 255 for c in rgb):
            return False
    norm = math.sqrt(sum(c * c for c in eye.gaze_dir))
    if abs(norm - 1.0) > 1e-6:
        return False
    return True


def _parse_eye(obj, line_number) -> EyeState:
    if not isinstance(obj, dict):
        raise MalformedRecord(line_number, "eye entry is not an object")
    for key in _EYE_KEYS:
        if key not in obj:
            raise MalformedRecord(line_number, f"missing eye key {key!r}")
    for key in ("eye_area", "iris_area", "pupil_area"):
        if not _is_num(obj[key]):
            raise MalformedRecord(line_number, f"{key} is not a finite number")
    for key in ("iris_rgb", "pupil_rgb", "pupil_center", "gaze_dir", "eye_center"):
        if not _is_vec3(obj[key]):
            raise MalformedRecord(line_number, f"{key} is not a 3-vector")
    if not isinstance(obj["valid"], bool):
        raise MalformedRecord(line_number, "valid is not a boolean")
    return EyeState(
        eye_area=float(obj["eye_area"]),
        iris_area=float(obj["iris_area"]),
        pupil_area=float(obj["pupil_area"]),
        iris_rgb=tuple(float(c) for c in obj["iris_rgb"]),
        pupil_rgb=tuple(float(c) for c in obj["pupil_rgb"]),
        pupil_center=tuple(float(c) for c in obj["pupil_center"]),
        gaze_dir=tuple(float(c) for c in obj["gaze_dir"]),
        eye_center=tuple(float(c) for c in obj["eye_center"]),
        valid=obj["valid"],
    )


def parse_track(path) -> Track:
    """Parse a .gzt.jsonl file into a Track.

    Unparseable lines raise MalformedRecord; records that parse but violate
    semantic invariants (area ordering, gaze norm) are kept with valid=False
    so that sequence slicing decides usability.
    """
    with open(path, "r", encoding="utf-8") as fh:
        lines = fh.read().splitlines()

    if not lines:
        raise MalformedHeader("empty file")
    try:
        header = json.loads(lines[0])
    except json.JSONDecodeError as exc:
        raise MalformedHeader(f"header is not valid JSON: {exc}") from exc
    if not isinstance(header, dict):
        raise MalformedHeader("header is not an object")
    if not isinstance(header.get("video_id"), str):
        raise MalformedHeader("header missing string video_id")
    if not _is_num(header.get("fps")) or header["fps"] <= 0:
        raise MalformedHeader("header fps must be a positive number")
    if header.get("label") not in LABELS:
        raise MalformedHeader(f"header label must be one of {LABELS}")

    records = []
    prev_frame = -1
    for offset, line in enumerate(lines[1:], start=2):
        if not line.strip():
            continue
        try:
            obj = json.loads(line)
        except json.JSONDecodeError as exc:
            raise MalformedRecord(offset, f"not valid JSON: {exc}") from exc
        if not isinstance(obj, dict):
            raise MalformedRecord(offset, "record is not an object")
        frame = obj.get("frame")
        if not isinstance(frame, int) or isinstance(frame, bool) or frame < 0:
            raise MalformedRecord(offset, "frame must be a non-negative integer")
        if frame <= prev_frame:
            raise MalformedRecord(offset, f"frame {frame} not strictly increasing")
        prev_frame = frame
        t_ms = obj.get("t_ms")
        if not _is_num(t_ms) or t_ms < 0:
            raise MalformedRecord(offset, "t_ms must be a non-negative number")
        left = _parse_eye(obj.get("left"), offset)
        right = _parse_eye(obj.get("right"), offset)
        valid = (
            left.valid and right.valid
            and _eye_semantically_valid(left)
            and _eye_semantically_valid(right)
        )
        records.append(TrackRecord(frame, float(t_ms), left, right, valid))

    if not records:
        raise EmptyTrack(f"{path}: no records after header")
    return Track(header["video_id"], float(header["fps"]), tuple(records), header["label"])


def _round9(x: float) -> float:
    # 9 significant digits is the canonical on-disk precision
    return float(f"{x:.9g}")


def _eye_dict(eye: EyeState) -> dict:
    return {
        "eye_area": _round9(eye.eye_area),
        "iris_area": _round9(eye.iris_area),
        "pupil_area": _round9(eye.pupil_area),
        "iris_rgb": [_round9(c) for c in eye.iris_rgb],
        "pupil_rgb": [_round9(c) for c in eye.pupil_rgb],
        "pupil_center": [_round9(c) for c in eye.pupil_center],
        "gaze_dir": [_round9(c) for c in eye.gaze_dir],
        "eye_center": [_round9(c) for c in eye.eye_center],
        "valid": eye.valid,
    }


def write_track(track: Track, path) -> None:
    """Write a Track as .gzt.jsonl, floats at 9 significant digits."""
    if not track.records:
        raise EmptyTrack("refusing to write a track with no records")
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(json.dumps({
            "video_id": track.video_id,
            "fps": _round9(track.fps),
            "label": track.label,
        }) + "\n")
        for rec in track.records:
            fh.write(json.dumps({
                "frame": rec.frame_index,
                "t_ms": _round9(rec.timestamp_ms),
                "left": _eye_dict(rec.left),
                "right": _eye_dict(rec.right),
            }) + "\n")


def swap_lr(rec: TrackRecord) -> TrackRecord:
    """Exchange the left and right eye of a record (used by symmetry tests)."""
    return replace(rec, left=rec.right, right=rec.left)
