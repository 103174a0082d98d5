"""Visual features: CIELab conversion of the region-averaged sRGB colors,
region areas, and left-right color differences.

Colors arrive already averaged within the tracker's region masks; this
module only converts and differences them. Lab values are also carried in
an 8-bit encoding (L*255/100, a+128, b+128) so the /256 normalization used
by the signature lands in [0,1).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InvalidRecord, OutOfRangeChannel
from .trackio import TrackRecord

# D65 reference white, 2-degree observer
_WHITE = np.array([0.95047, 1.0, 1.08883])

_RGB_TO_XYZ = np.array([
    [0.4124564, 0.3575761, 0.1804375],
    [0.2126729, 0.7151522, 0.0721750],
    [0.0193339, 0.1191920, 0.9503041],
])
_XYZ_TO_RGB = np.linalg.inv(_RGB_TO_XYZ)


@dataclass(frozen=True)
class LabColor:
    L: float
    a: float
    b: float

    def encode_8bit(self) -> np.ndarray:
        """Map to (L*255/100, a+128, b+128), each in [0, 256)."""
        return np.array([self.L * 255.0 / 100.0, self.a + 128.0, self.b + 128.0])


@dataclass(frozen=True)
class VisualFrame:
    iris_color_l: LabColor
    iris_color_r: LabColor
    pupil_color_l: LabColor
    pupil_color_r: LabColor
    area_eye_l: float
    area_eye_r: float
    area_iris_l: float
    area_iris_r: float
    area_pupil_l: float
    area_pupil_r: float
    iris_color_diff: np.ndarray   # per-channel |Lab8_l - Lab8_r|
    pupil_color_diff: np.ndarray


def srgb_to_lab(rgb) -> LabColor:
    """Standard sRGB -> XYZ(D65) -> CIELab conversion."""
    rgb = np.asarray(rgb, dtype=np.float64)
    if rgb.shape != (3,):
        raise OutOfRangeChannel(f"expected 3 channels, got shape {rgb.shape}")
    if np.any(rgb < 0) or np.any(rgb > 255):
        raise OutOfRangeChannel(f"sRGB channels out of [0,255]: {rgb}")
    c = rgb / 255.0
    # inverse sRGB companding
    linear = np.where(c <= 0.04045, c / 12.92, ((c + 0.055) / 1.055) ** 2.4)
    xyz = _RGB_TO_XYZ @ linear
    r = xyz / _WHITE
    f = np.where(r > (6.0 / 29.0) ** 3, np.cbrt(r), r / (3.0 * (6.0 / 29.0) ** 2) + 4.0 / 29.0)
    L = 116.0 * f[1] - 16.0
    a = 500.0 * (f[0] - f[1])
    b = 200.0 * (f[1] - f[2])
    return LabColor(float(L), float(a), float(b))


def lab_to_srgb(lab: LabColor) -> np.ndarray:
    """Inverse conversion; output clipped to [0, 255]."""
    fy = (lab.L + 16.0) / 116.0
    fx = fy + lab.a / 500.0
    fz = fy - lab.b / 200.0
    f = np.array([fx, fy, fz])
    delta = 6.0 / 29.0
    r = np.where(f > delta, f ** 3, 3.0 * delta * delta * (f - 4.0 / 29.0))
    xyz = r * _WHITE
    linear = _XYZ_TO_RGB @ xyz
    linear = np.clip(linear, 0.0, None)
    c = np.where(linear <= 0.0031308, linear * 12.92, 1.055 * linear ** (1.0 / 2.4) - 0.055)
    return np.clip(c * 255.0, 0.0, 255.0)


def visual_frame(rec: TrackRecord) -> VisualFrame:
    """Visual features of one valid frame."""
    if not rec.valid:
        raise InvalidRecord(f"frame {rec.frame_index} is not valid")
    iris_l = srgb_to_lab(rec.left.iris_rgb)
    iris_r = srgb_to_lab(rec.right.iris_rgb)
    pupil_l = srgb_to_lab(rec.left.pupil_rgb)
    pupil_r = srgb_to_lab(rec.right.pupil_rgb)
    return VisualFrame(
        iris_color_l=iris_l,
        iris_color_r=iris_r,
        pupil_color_l=pupil_l,
        pupil_color_r=pupil_r,
        area_eye_l=rec.left.eye_area,
        area_eye_r=rec.right.eye_area,
        area_iris_l=rec.left.iris_area,
        area_iris_r=rec.right.iris_area,
        area_pupil_l=rec.left.pupil_area,
        area_pupil_r=rec.right.pupil_area,
        iris_color_diff=np.abs(iris_l.encode_8bit() - iris_r.encode_8bit()),
        pupil_color_diff=np.abs(pupil_l.encode_8bit() - pupil_r.encode_8bit()),
    )
