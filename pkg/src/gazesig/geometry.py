"""Vergence geometry: closest approach of the two gaze rays and the
per-frame geometric feature set (gaze vectors, 3D gaze point, eye/pupil
distances, left-right area differences).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InvalidRecord, NonUnitDirection
from .trackio import TrackRecord

# |1 - (g_l . g_r)^2| below this means the rays are treated as parallel
PARALLEL_EPS = 1e-8


@dataclass(frozen=True)
class VergenceSolution:
    rho: np.ndarray        # midpoint of the two closest points, mm
    rho_gap: np.ndarray    # displacement left closest point -> right closest point
    rho_hat: float         # |rho_gap|
    delta_rho: float       # minimized squared distance
    t_left: float
    t_right: float
    degenerate: bool


@dataclass(frozen=True)
class GeoFrame:
    gaze_left: np.ndarray
    gaze_right: np.ndarray
    vergence: VergenceSolution
    eye_dist: float
    pupil_dist: float
    area_diff_eye: float
    area_diff_iris: float
    area_diff_pupil: float


def intersect_gaze_rays(p_left, g_left, p_right, g_right) -> VergenceSolution:
    """Closed-form least-squares closest approach of two 3D rays.

    Minimizes |(p_l + t_l g_l) - (p_r + t_r g_r)|^2 over (t_l, t_r) via the
    2x2 normal equations. Near-parallel rays (|1 - (g_l.g_r)^2| < 1e-8) are
    reported degenerate with both parameters pinned at 0.
    """
    p_l = np.asarray(p_left, dtype=np.float64)
    g_l = np.asarray(g_left, dtype=np.float64)
    p_r = np.asarray(p_right, dtype=np.float64)
    g_r = np.asarray(g_right, dtype=np.float64)

    for g in (g_l, g_r):
        if abs(np.linalg.norm(g) - 1.0) > 1e-3:
            raise NonUnitDirection(f"direction norm {np.linalg.norm(g)!r} deviates from 1")

    b = float(g_l @ g_r)
    denom = 1.0 - b * b
    w = p_l - p_r

    if abs(denom) < PARALLEL_EPS:
        gap = w
        rho_hat = float(np.linalg.norm(gap))
        return VergenceSolution(
            rho=(p_l + p_r) / 2.0,
            rho_gap=gap,
            rho_hat=rho_hat,
            delta_rho=rho_hat * rho_hat,
            t_left=0.0,
            t_right=0.0,
            degenerate=True,
        )

    wl = float(w @ g_l)
    wr = float(w @ g_r)
    t_l = (-wl + b * wr) / denom
    t_r = (wr - b * wl) / denom
    c_l = p_l + t_l * g_l
    c_r = p_r + t_r * g_r
    gap = c_l - c_r
    rho_hat = float(np.linalg.norm(gap))
    return VergenceSolution(
        rho=(c_l + c_r) / 2.0,
        rho_gap=gap,
        rho_hat=rho_hat,
        delta_rho=rho_hat * rho_hat,
        t_left=float(t_l),
        t_right=float(t_r),
        degenerate=False,
    )


def geo_frame(rec: TrackRecord) -> GeoFrame:
    """Geometric features of one valid frame."""
    if not rec.valid:
        raise InvalidRecord(f"frame {rec.frame_index} is not valid")
    left, right = rec.left, rec.right
    vergence = intersect_gaze_rays(
        left.pupil_center, left.gaze_dir, right.pupil_center, right.gaze_dir
    )
    eye_c_l = np.asarray(left.eye_center, dtype=np.float64)
    eye_c_r = np.asarray(right.eye_center, dtype=np.float64)
    pup_c_l = np.asarray(left.pupil_center, dtype=np.float64)
    pup_c_r = np.asarray(right.pupil_center, dtype=np.float64)
    return GeoFrame(
        gaze_left=np.asarray(left.gaze_dir, dtype=np.float64),
        gaze_right=np.asarray(right.gaze_dir, dtype=np.float64),
        vergence=vergence,
        eye_dist=float(np.linalg.norm(eye_c_l - eye_c_r)),
        pupil_dist=float(np.linalg.norm(pup_c_l - pup_c_r)),
        area_diff_eye=abs(left.eye_area - right.eye_area),
        area_diff_iris=abs(left.iris_area - right.iris_area),
        area_diff_pupil=abs(left.pupil_area - right.pupil_area),
    )
