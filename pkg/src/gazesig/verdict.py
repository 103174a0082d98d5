"""Per-video verdicts from per-sequence fake confidences."""

from __future__ import annotations

import math
from dataclasses import dataclass

from .errors import EmptyPrediction

SCHEMES = ("mean", "majority", "confidence", "log_odds")
DEFAULT_SCHEME = "log_odds"

_CLAMP = 1e-6


@dataclass(frozen=True)
class VideoVerdict:
    video_id: str
    scheme: str
    score: float
    label: str  # real | fake
    n_sequences: int
    sequence_probs: tuple


def aggregate(probs, scheme: str = DEFAULT_SCHEME, video_id: str = "") -> VideoVerdict:
    """Fold sequence fake-confidences into one verdict.

    Ties at the decision boundary resolve to real (never accuse on a
    coin flip).
    """
    probs = [float(p) for p in probs]
    if not probs:
        raise EmptyPrediction(f"video {video_id!r} has no sequence predictions")
    if scheme not in SCHEMES:
        raise ValueError(f"unknown scheme {scheme!r}")
    clamped = [min(max(p, _CLAMP), 1.0 - _CLAMP) for p in probs]
    n = len(clamped)

    if scheme == "mean":
        score = sum(clamped) / n
        fake = score > 0.5
    elif scheme == "majority":
        votes = sum(1 for p in clamped if p > 0.5)
        score = votes / n
        fake = votes > n / 2
    elif scheme == "confidence":
        score = sum(2.0 * p - 1.0 for p in clamped) / n
        fake = score > 0.0
    else:  # log_odds
        score = sum(math.log(p / (1.0 - p)) for p in clamped) / n
        fake = score > 0.0

    return VideoVerdict(
        video_id=video_id,
        scheme=scheme,
        score=score,
        label="fake" if fake else "real",
        n_sequences=n,
        sequence_probs=tuple(probs),
    )
