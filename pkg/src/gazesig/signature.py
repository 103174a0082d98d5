"""Assembly of the 40 x omega x 3 signature tensor and its binary format.

Rows 0-19 are temporal feature signals, rows 20-39 their power spectral
densities in the same order. Every entry lands in [0, 1) after the final
clamp.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass

import numpy as np

from .errors import BadMagic, InvalidWindow, VersionMismatch
from .signals import SequenceWindow, psd, ss_normalize, xcorr

N_ROWS = 40
N_CHANNELS = 3
# largest float32 strictly below 1, so the clamp survives the f32 cast
CLAMP_MAX = float(np.nextafter(np.float32(1.0), np.float32(0.0)))

DEFAULT_D_PLUS = 80.0  # mm, upper bound of adult interpupillary distance

LABEL_CODES = {"real": 0, "fake": 1, "unknown": 2}
LABEL_NAMES = {v: k for k, v in LABEL_CODES.items()}

# Temporal row -> feature domain, per channel where a row mixes domains.
# Spectral row 20+i inherits row i's entry.
ROW_DOMAINS = (
    "visual", "visual", "visual", "visual",              # 0-3 region colors
    ("visual", "visual", "geometric"),                   # 4 eye areas + diff
    ("visual", "visual", "geometric"),                   # 5 iris areas + diff
    ("visual", "visual", "geometric"),                   # 6 pupil areas + diff
    "visual", "visual",                                  # 7-8 color diffs
    "geometric", "geometric",                            # 9-10 gaze vectors
    "geometric",                                         # 11 gaze point
    "geometric",                                         # 12 gaze error
    "geometric", "geometric", "geometric",               # 13-15 cost, d, d_p
    "metric", "metric", "metric", "metric",              # 16-19 correlations
)

GAZE_VECTOR_ROWS = (9, 10)
RAW_GAZE_ROWS = (11, 12, 13)

CONTENT_DOMAINS = ("visual", "geometric", "metric")
HALF_DOMAINS = ("temporal", "spectral")
ALL_DOMAINS = CONTENT_DOMAINS + HALF_DOMAINS


@dataclass(frozen=True)
class Signature:
    tensor: np.ndarray  # (40, omega, 3) float32
    omega: int
    video_id: str
    start_frame: int
    label: str


def _ss2(v: np.ndarray) -> np.ndarray:
    # exact for unit-vector components in [-1, 1]
    return (v + 1.0) / 2.0


def build_signature(win: SequenceWindow, d_plus: float = DEFAULT_D_PLUS) -> Signature:
    """Build one signature from a sequence window.

    Temporal rows follow the fixed layout documented in ROW_DOMAINS; the
    spectral half is the SS-normalized periodogram of each temporal row.
    """
    if d_plus <= 0:
        raise ValueError("d_plus must be positive")
    if not win.frames or len(win.frames) != win.omega:
        raise InvalidWindow(f"window has {len(win.frames)} frames, omega={win.omega}")
    omega = win.omega

    def stack(fn):
        return np.array([fn(f) for f in win.frames])

    lab_iris_l = stack(lambda f: f.visual.iris_color_l.encode_8bit())
    lab_iris_r = stack(lambda f: f.visual.iris_color_r.encode_8bit())
    lab_pupil_l = stack(lambda f: f.visual.pupil_color_l.encode_8bit())
    lab_pupil_r = stack(lambda f: f.visual.pupil_color_r.encode_8bit())
    a_eye_l = stack(lambda f: f.visual.area_eye_l)
    a_eye_r = stack(lambda f: f.visual.area_eye_r)
    a_iris_l = stack(lambda f: f.visual.area_iris_l)
    a_iris_r = stack(lambda f: f.visual.area_iris_r)
    a_pupil_l = stack(lambda f: f.visual.area_pupil_l)
    a_pupil_r = stack(lambda f: f.visual.area_pupil_r)
    gaze_l = stack(lambda f: f.geo.gaze_left)
    gaze_r = stack(lambda f: f.geo.gaze_right)
    rho = stack(lambda f: f.geo.vergence.rho)
    rho_gap = stack(lambda f: f.geo.vergence.rho_gap)
    delta_rho = stack(lambda f: f.geo.vergence.delta_rho)
    eye_dist = stack(lambda f: f.geo.eye_dist)
    pupil_dist = stack(lambda f: f.geo.pupil_dist)

    t = np.zeros((20, omega, 3))
    t[0] = lab_iris_l / 256.0
    t[1] = lab_iris_r / 256.0
    t[2] = lab_pupil_l / 256.0
    t[3] = lab_pupil_r / 256.0
    t[4, :, 0] = ss_normalize(a_eye_l)
    t[4, :, 1] = ss_normalize(a_eye_r)
    t[4, :, 2] = np.abs(a_eye_l - a_eye_r) / d_plus
    t[5, :, 0] = ss_normalize(a_iris_l)
    t[5, :, 1] = ss_normalize(a_iris_r)
    t[5, :, 2] = ss_normalize(np.abs(a_iris_l - a_iris_r))
    t[6, :, 0] = ss_normalize(a_pupil_l)
    t[6, :, 1] = ss_normalize(a_pupil_r)
    t[6, :, 2] = np.abs(a_pupil_l - a_pupil_r) / d_plus
    t[7] = np.abs(lab_iris_l - lab_iris_r) / 256.0
    t[8] = np.abs(lab_pupil_l - lab_pupil_r) / 256.0
    t[9] = _ss2(gaze_l)
    t[10] = _ss2(gaze_r)
    t[11] = ss_normalize(rho)
    t[12] = rho_gap / d_plus
    t[13] = ss_normalize(delta_rho)[:, None]
    t[14] = ss_normalize(eye_dist)[:, None]
    t[15] = ss_normalize(pupil_dist)[:, None]
    t[16] = xcorr(lab_iris_l, lab_iris_r)
    t[17] = xcorr(lab_pupil_l, lab_pupil_r)
    t[18, :, 0] = xcorr(a_iris_l, a_iris_r)
    t[18, :, 1] = xcorr(a_pupil_l, a_pupil_r)
    t[18, :, 2] = xcorr(a_eye_l, a_eye_r)
    t[19] = xcorr(gaze_l, gaze_r)

    s = np.array([psd(t[i]) for i in range(20)])
    tensor = np.clip(np.concatenate([t, s], axis=0), 0.0, CLAMP_MAX)
    return Signature(
        tensor=tensor.astype(np.float32),
        omega=omega,
        video_id=win.video_id,
        start_frame=win.start_frame,
        label=win.label,
    )


def domain_keep_mask(keep) -> np.ndarray:
    """Boolean (40, 3) mask of cells kept for a set of feature domains.

    `keep` is a subset of {visual, geometric, metric, temporal, spectral}.
    An empty selection on either axis (content vs temporal/spectral halves)
    means "keep everything on that axis".
    """
    keep = set(keep)
    unknown = keep - set(ALL_DOMAINS)
    if unknown:
        raise ValueError(f"unknown feature domains: {sorted(unknown)}")
    halves = keep & set(HALF_DOMAINS) or set(HALF_DOMAINS)
    contents = keep & set(CONTENT_DOMAINS) or set(CONTENT_DOMAINS)
    mask = np.zeros((N_ROWS, N_CHANNELS), dtype=bool)
    for row in range(N_ROWS):
        half = "temporal" if row < 20 else "spectral"
        if half not in halves:
            continue
        entry = ROW_DOMAINS[row % 20]
        if isinstance(entry, str):
            entry = (entry,) * N_CHANNELS
        for ch in range(N_CHANNELS):
            mask[row, ch] = entry[ch] in contents
    return mask


def row_keep_mask(rows) -> np.ndarray:
    """Boolean (40, 3) mask keeping explicit rows only."""
    mask = np.zeros((N_ROWS, N_CHANNELS), dtype=bool)
    mask[list(rows)] = True
    return mask


def apply_mask(sig: Signature, mask: np.ndarray) -> Signature:
    """Zero every cell of the tensor whose (row, channel) is not kept."""
    tensor = sig.tensor * mask[:, None, :].astype(np.float32)
    return Signature(tensor, sig.omega, sig.video_id, sig.start_frame, sig.label)


_MAGIC = b"GZSG"
_VERSION = 1


def write_signatures(sigs, path) -> None:
    """Write signatures to a .gzsg file (bit-exact round trip)."""
    sigs = list(sigs)
    omega = sigs[0].omega if sigs else 0
    with open(path, "wb") as fh:
        fh.write(_MAGIC)
        fh.write(struct.pack("<HIHHH", _VERSION, len(sigs), omega, N_ROWS, N_CHANNELS))
        for sig in sigs:
            if sig.omega != omega:
                raise ValueError("all signatures in one file must share omega")
            vid = sig.video_id.encode("utf-8")
            fh.write(struct.pack("<H", len(vid)))
            fh.write(vid)
            fh.write(struct.pack("<IB", sig.start_frame, LABEL_CODES[sig.label]))
            fh.write(np.ascontiguousarray(sig.tensor, dtype="<f4").tobytes())


def read_signatures(path) -> list:
    with open(path, "rb") as fh:
        data = fh.read()
    if data[:4] != _MAGIC:
        raise BadMagic(f"{path}: bad magic {data[:4]!r}")
    version, count, omega, rows, channels = struct.unpack_from("<HIHHH", data, 4)
    if version != _VERSION:
        raise VersionMismatch(f"{path}: version {version}, expected {_VERSION}")
    if rows != N_ROWS or channels != N_CHANNELS:
        raise VersionMismatch(f"{path}: unexpected tensor layout {rows}x{channels}")
    off = 4 + struct.calcsize("<HIHHH")
    tensor_bytes = rows * omega * channels * 4
    sigs = []
    try:
        for _ in range(count):
            (vid_len,) = struct.unpack_from("<H", data, off)
            off += 2
            vid = data[off:off + vid_len].decode("utf-8")
            off += vid_len
            start_frame, label_code = struct.unpack_from("<IB", data, off)
            off += 5
            raw = data[off:off + tensor_bytes]
            if len(raw) < tensor_bytes:
                raise OSError(f"{path}: truncated tensor data")
            off += tensor_bytes
            tensor = np.frombuffer(raw, dtype="<f4").reshape(rows, omega, channels).copy()
            sigs.append(Signature(tensor, omega, vid, start_frame, LABEL_NAMES[label_code]))
    except struct.error as exc:
        raise OSError(f"{path}: truncated file: {exc}") from exc
    return sigs
