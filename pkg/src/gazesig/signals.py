"""Sequence slicing and the signal machinery: shift/scale normalization,
periodogram power spectral density, and normalized cross-correlation.

Signals are numpy arrays of shape (omega,) or (omega, channels).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import LengthMismatch
from .geometry import GeoFrame, geo_frame
from .trackio import Track
from .visual import VisualFrame, visual_frame

SS_EPS = 1e-12


@dataclass(frozen=True)
class FrameFeatures:
    visual: VisualFrame
    geo: GeoFrame


@dataclass(frozen=True)
class SequenceWindow:
    video_id: str
    start_frame: int
    omega: int
    frames: tuple  # omega FrameFeatures
    label: str = "unknown"


def slice_sequences(track: Track, omega: int) -> list:
    """Cut a track into non-overlapping windows of omega consecutive valid
    frames.

    Packing is greedy left-to-right; a candidate window containing an
    invalid or non-contiguous frame is abandoned and packing restarts just
    after the offending frame.
    """
    if omega < 2:
        raise ValueError("omega must be >= 2")
    records = track.records
    n = len(records)
    windows = []
    i = 0
    while i + omega <= n:
        bad = -1
        for j in range(i, i + omega):
            contiguous = j == i or records[j].frame_index == records[j - 1].frame_index + 1
            if not records[j].valid or not contiguous:
                bad = j
                break
        if bad >= 0:
            i = bad + 1
            continue
        frames = tuple(
            FrameFeatures(visual_frame(records[j]), geo_frame(records[j]))
            for j in range(i, i + omega)
        )
        windows.append(SequenceWindow(
            video_id=track.video_id,
            start_frame=records[i].frame_index,
            omega=omega,
            frames=frames,
            label=track.label,
        ))
        i += omega
    return windows


def ss_normalize(sig: np.ndarray) -> np.ndarray:
    """Per-channel (x - min) / (max - min + eps); constant channels map to
    all-zeros. Output lies in [0, 1)."""
    x = np.asarray(sig, dtype=np.float64)
    lo = x.min(axis=0, keepdims=True)
    hi = x.max(axis=0, keepdims=True)
    return (x - lo) / (hi - lo + SS_EPS)


def psd(sig: np.ndarray, ss: bool = True) -> np.ndarray:
    """Two-sided periodogram P_k = |DFT_k(x)|^2 / omega, same length as the
    input. SS-normalized by default."""
    x = np.asarray(sig, dtype=np.float64)
    omega = x.shape[0]
    power = np.abs(np.fft.fft(x, axis=0)) ** 2 / omega
    return ss_normalize(power) if ss else power


def xcorr(a: np.ndarray, b: np.ndarray, ss: bool = True) -> np.ndarray:
    """Mean-removed, zero-padded normalized cross-correlation.

    r(tau) = sum_n abar_n bbar_{n+tau} / (|abar| |bbar|), evaluated at the
    omega centered lags tau in [-floor(omega/2), ceil(omega/2) - 1]. Raw
    values lie in [-1, 1]; SS-normalized to [0,1) by default. If either
    signal is constant the raw correlation is all-zeros.
    """
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise LengthMismatch(f"shape mismatch {a.shape} vs {b.shape}")
    squeeze = a.ndim == 1
    if squeeze:
        a = a[:, None]
        b = b[:, None]
    omega = a.shape[0]
    abar = a - a.mean(axis=0, keepdims=True)
    bbar = b - b.mean(axis=0, keepdims=True)
    lo = omega - 1 - omega // 2
    out = np.zeros((omega, a.shape[1]))
    for ch in range(a.shape[1]):
        # an exactly constant channel must correlate to zero; the mean
        # subtraction alone can leave 1-ulp residue that would normalize
        # to full-scale noise
        if np.ptp(a[:, ch]) == 0.0 or np.ptp(b[:, ch]) == 0.0:
            continue
        denom = np.linalg.norm(abar[:, ch]) * np.linalg.norm(bbar[:, ch])
        if denom > 0:
            # full[tau + omega - 1] = sum_n abar_n bbar_{n + tau}
            full = np.correlate(bbar[:, ch], abar[:, ch], mode="full")
            out[:, ch] = full[lo:lo + omega] / denom
    if ss:
        out = ss_normalize(out)
    return out[:, 0] if squeeze else out
