"""Synthetic eye/gaze track generation.

Real tracks follow an alternating fixation/saccade schedule toward shared
3D targets, so both gaze rays converge by construction. Fake tracks start
from the paired real track and apply behavioral perturbations: gaze
over-smoothing, angular noise, skipped saccades, left-right area
asymmetry, and color drift on one eye.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import EmptyPerturbationList
from .trackio import EyeState, Track, TrackRecord
from .visual import LabColor, lab_to_srgb, srgb_to_lab

EYEBALL_RADIUS_MM = 10.0

PERTURBATION_KINDS = ("smooth", "noise", "skip_saccades", "asymmetry", "color_drift")


@dataclass(frozen=True)
class SynthConfig:
    seed: int = 0
    n_frames: int = 150
    fps: float = 30.0
    ipd_mm: float = 64.0
    fixation_duration_ms: tuple = (200.0, 400.0)
    saccade_duration_ms: tuple = (20.0, 80.0)
    gaze_noise_deg: float = 0.2
    target_volume: tuple = ((-300.0, 300.0), (-200.0, 200.0), (300.0, 800.0))
    base_areas_mm2: tuple = (600.0, 140.0, 20.0)  # eye, iris, pupil
    color_jitter_8bit: float = 1.0
    iris_rgb: tuple = (101.0, 66.0, 38.0)
    pupil_rgb: tuple = (25.0, 20.0, 18.0)


@dataclass(frozen=True)
class FakePerturbation:
    kind: str
    strength: float

    def __post_init__(self):
        if self.kind not in PERTURBATION_KINDS:
            raise ValueError(f"unknown perturbation kind {self.kind!r}")
        if self.strength < 0:
            raise ValueError("strength must be >= 0")


@dataclass
class _TrackArrays:
    """Mutable per-frame state, one row per frame."""
    gaze: dict            # side -> (n,3) unit vectors
    pupil_center: dict    # side -> (n,3)
    eye_center: dict      # side -> (3,)
    areas: dict           # side -> (n,3): eye, iris, pupil
    iris_rgb: dict        # side -> (n,3)
    pupil_rgb: dict
    saccade_mask: np.ndarray = field(default=None)


def _unit(v):
    return v / np.linalg.norm(v, axis=-1, keepdims=True)


def _perp_basis(d):
    """Two unit vectors orthogonal to each row of d (n,3)."""
    ref = np.where(np.abs(d[:, [2]]) < 0.9, [[0.0, 0.0, 1.0]], [[1.0, 0.0, 0.0]])
    u1 = _unit(np.cross(d, ref))
    u2 = np.cross(d, u1)
    return u1, u2


def _jitter_directions(dirs, noise_deg, rng):
    """Independent small-angle perturbation of each unit direction."""
    if noise_deg <= 0:
        return dirs
    sigma = np.deg2rad(noise_deg)
    u1, u2 = _perp_basis(dirs)
    t1 = rng.normal(0.0, sigma, size=(len(dirs), 1))
    t2 = rng.normal(0.0, sigma, size=(len(dirs), 1))
    return _unit(dirs + t1 * u1 + t2 * u2)


def _schedule(cfg: SynthConfig, rng) -> tuple:
    """Per-frame fixated target positions plus a saccade-frame mask."""
    n = cfg.n_frames
    lo, hi = np.array(cfg.target_volume).T

    def sample_target():
        return rng.uniform(lo, hi)

    def frames_for(dur_range):
        ms = rng.uniform(*dur_range)
        return max(1, round(ms * cfg.fps / 1000.0))

    targets = np.zeros((n, 3))
    saccade = np.zeros(n, dtype=bool)
    current = sample_target()
    i = 0
    while i < n:
        for k in range(min(frames_for(cfg.fixation_duration_ms), n - i)):
            targets[i] = current
            i += 1
        if i >= n:
            break
        nxt = sample_target()
        m = min(frames_for(cfg.saccade_duration_ms), n - i)
        for k in range(m):
            # smoothstep between the two fixation points
            s = (k + 1) / (m + 1)
            s = s * s * (3.0 - 2.0 * s)
            targets[i] = current + s * (nxt - current)
            saccade[i] = True
            i += 1
        current = nxt
    return targets, saccade


def _generate_arrays(cfg: SynthConfig) -> _TrackArrays:
    ss = np.random.SeedSequence(cfg.seed)
    r_sched, r_noise, r_vis, _ = [np.random.default_rng(c) for c in ss.spawn(4)]
    n = cfg.n_frames
    targets, saccade = _schedule(cfg, r_sched)

    eye_center = {
        "left": np.array([-cfg.ipd_mm / 2.0, 0.0, 0.0]),
        "right": np.array([cfg.ipd_mm / 2.0, 0.0, 0.0]),
    }
    gaze, pupil_center, areas, iris_rgb, pupil_rgb = {}, {}, {}, {}, {}
    base = np.array(cfg.base_areas_mm2)
    t = np.arange(n)
    for side in ("left", "right"):
        dirs = _unit(targets - eye_center[side])
        dirs = _jitter_directions(dirs, cfg.gaze_noise_deg, r_noise)
        gaze[side] = dirs
        pupil_center[side] = eye_center[side] + EYEBALL_RADIUS_MM * dirs
        # slow common pupil response plus small independent measurement jitter
        common = 1.0 + 0.01 * np.sin(2.0 * np.pi * 0.2 * t / cfg.fps)[:, None]
        areas[side] = base * common + r_vis.normal(0.0, 0.3, size=(n, 3))
        iris_rgb[side] = np.clip(
            np.array(cfg.iris_rgb) + r_vis.normal(0.0, cfg.color_jitter_8bit, (n, 3)),
            0.0, 255.0)
        pupil_rgb[side] = np.clip(
            np.array(cfg.pupil_rgb) + r_vis.normal(0.0, cfg.color_jitter_8bit, (n, 3)),
            0.0, 255.0)
    return _TrackArrays(gaze, pupil_center, eye_center, areas, iris_rgb, pupil_rgb, saccade)


def _assemble(cfg: SynthConfig, arrays: _TrackArrays, video_id: str, label: str) -> Track:
    records = []
    for i in range(cfg.n_frames):
        eyes = {}
        for side in ("left", "right"):
            a = arrays.areas[side][i]
            eyes[side] = EyeState(
                eye_area=float(a[0]),
                iris_area=float(min(a[1], a[0])),
                pupil_area=float(np.clip(a[2], 0.0, min(a[1], a[0]))),
                iris_rgb=tuple(arrays.iris_rgb[side][i]),
                pupil_rgb=tuple(arrays.pupil_rgb[side][i]),
                pupil_center=tuple(arrays.pupil_center[side][i]),
                gaze_dir=tuple(_unit(arrays.gaze[side][i][None, :])[0]),
                eye_center=tuple(arrays.eye_center[side]),
                valid=True,
            )
        records.append(TrackRecord(
            frame_index=i,
            timestamp_ms=i * 1000.0 / cfg.fps,
            left=eyes["left"],
            right=eyes["right"],
            valid=True,
        ))
    return Track(video_id, cfg.fps, tuple(records), label)


def gen_real_track(cfg: SynthConfig, video_id: str = "") -> Track:
    """Deterministic real track: both eyes fixate shared targets."""
    arrays = _generate_arrays(cfg)
    return _assemble(cfg, arrays, video_id or f"real_{cfg.seed:06d}", "real")


def _moving_average(x, window):
    kernel = np.ones(window)
    counts = np.convolve(np.ones(len(x)), kernel, mode="same")
    return np.array([
        np.convolve(x[:, c], kernel, mode="same") / counts for c in range(x.shape[1])
    ]).T


def _bounded_walk(rng, n, bound):
    steps = rng.normal(0.0, max(bound, 1e-9) / 10.0, size=n)
    return np.clip(np.cumsum(steps), -bound, bound)


def _apply_smooth(arrays, strength, rng, cfg):
    window = max(3, round(strength))
    if window % 2 == 0:
        window += 1
    for side in ("left", "right"):
        smoothed = _unit(_moving_average(arrays.gaze[side], window))
        arrays.gaze[side] = smoothed
        arrays.pupil_center[side] = arrays.eye_center[side] + EYEBALL_RADIUS_MM * smoothed


def _apply_noise(arrays, strength, rng, cfg):
    for side in ("left", "right"):
        noisy = _jitter_directions(arrays.gaze[side], strength, rng)
        arrays.gaze[side] = noisy
        arrays.pupil_center[side] = arrays.eye_center[side] + EYEBALL_RADIUS_MM * noisy


def _apply_skip_saccades(arrays, strength, rng, cfg):
    frac = min(strength, 1.0)
    skip = arrays.saccade_mask & (rng.random(cfg.n_frames) < frac)
    for i in np.flatnonzero(skip):
        if i == 0:
            continue
        for side in ("left", "right"):
            arrays.gaze[side][i] = arrays.gaze[side][i - 1]
            arrays.pupil_center[side][i] = arrays.pupil_center[side][i - 1]


def _divergence_signal(rng, n, amplitude):
    """Sinusoid plus bounded random walk whose peak lands in
    [0.87, 0.93] * amplitude."""
    t = np.arange(n)
    freq = rng.uniform(0.5, 2.0)
    phase = rng.uniform(0.0, 2.0 * np.pi)
    walk = _bounded_walk(rng, n, 1.0)
    raw = 0.7 * np.sin(2.0 * np.pi * freq * t / n + phase) + 0.3 * walk
    peak = np.max(np.abs(raw))
    if peak == 0:
        return np.zeros(n)
    return raw / peak * amplitude * rng.uniform(0.87, 0.93)


def _apply_asymmetry(arrays, strength, rng, cfg):
    n = cfg.n_frames
    base_pupil = cfg.base_areas_mm2[2]
    # pupil divergence capped so the smaller region stays physical
    arrays.areas["right"][:, 1] += _divergence_signal(rng, n, strength)
    arrays.areas["right"][:, 2] += _divergence_signal(
        rng, n, min(strength, 0.7 * base_pupil))


def _apply_color_drift(arrays, strength, rng, cfg):
    n = cfg.n_frames
    for attr in ("iris_rgb", "pupil_rgb"):
        colors = getattr(arrays, attr)["right"]
        drift = np.stack([_bounded_walk(rng, n, strength) for _ in range(3)], axis=1)
        for i in range(n):
            lab8 = srgb_to_lab(colors[i]).encode_8bit() + drift[i]
            lab = LabColor(lab8[0] * 100.0 / 255.0, lab8[1] - 128.0, lab8[2] - 128.0)
            colors[i] = lab_to_srgb(lab)


_APPLY = {
    "smooth": _apply_smooth,
    "noise": _apply_noise,
    "skip_saccades": _apply_skip_saccades,
    "asymmetry": _apply_asymmetry,
    "color_drift": _apply_color_drift,
}


def add_angular_noise(track: Track, noise_deg: float, seed: int = 0) -> Track:
    """Jitter every gaze direction of an existing track (robustness proxy
    for post-processing artifacts on the tracker output)."""
    if noise_deg <= 0:
        return track
    rng = np.random.default_rng(seed)
    records = []
    for rec in track.records:
        eyes = {}
        for side, eye in (("left", rec.left), ("right", rec.right)):
            d = np.asarray(eye.gaze_dir)[None, :]
            noisy = _jitter_directions(d, noise_deg, rng)[0]
            center = np.asarray(eye.eye_center)
            eyes[side] = EyeState(
                eye_area=eye.eye_area,
                iris_area=eye.iris_area,
                pupil_area=eye.pupil_area,
                iris_rgb=eye.iris_rgb,
                pupil_rgb=eye.pupil_rgb,
                pupil_center=tuple(center + EYEBALL_RADIUS_MM * noisy),
                gaze_dir=tuple(noisy),
                eye_center=eye.eye_center,
                valid=eye.valid,
            )
        records.append(TrackRecord(rec.frame_index, rec.timestamp_ms,
                                   eyes["left"], eyes["right"], rec.valid))
    return Track(track.video_id, track.fps, tuple(records), track.label)


def gen_fake_track(cfg: SynthConfig, perturbations, video_id: str = "") -> Track:
    """Fake track: the paired real track with perturbations applied in
    listed order."""
    perturbations = list(perturbations)
    if not perturbations:
        raise EmptyPerturbationList("a fake track needs at least one perturbation")
    arrays = _generate_arrays(cfg)
    ss = np.random.SeedSequence(cfg.seed)
    r_pert = np.random.default_rng(ss.spawn(4)[3])
    for pert in perturbations:
        _APPLY[pert.kind](arrays, pert.strength, r_pert, cfg)
    return _assemble(cfg, arrays, video_id or f"fake_{cfg.seed:06d}", "fake")
