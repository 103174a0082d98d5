import numpy as np
import pytest

from gazesig.trackio import EyeState, Track, TrackRecord


def unit(v):
    v = np.asarray(v, dtype=np.float64)
    return v / np.linalg.norm(v)


def make_eye(eye_center, target, *, eye_area=600.0, iris_area=140.0,
             pupil_area=20.0, iris_rgb=(101.0, 66.0, 38.0),
             pupil_rgb=(25.0, 20.0, 18.0), eyeball_r=10.0, valid=True):
    """Eye fixating `target` from `eye_center`."""
    center = np.asarray(eye_center, dtype=np.float64)
    gaze = unit(np.asarray(target) - center)
    return EyeState(
        eye_area=eye_area,
        iris_area=iris_area,
        pupil_area=pupil_area,
        iris_rgb=tuple(iris_rgb),
        pupil_rgb=tuple(pupil_rgb),
        pupil_center=tuple(center + eyeball_r * gaze),
        gaze_dir=tuple(gaze),
        eye_center=tuple(center),
        valid=valid,
    )


def make_record(frame, target=(0.0, 0.0, 500.0), ipd=64.0, fps=30.0, **eye_kwargs):
    """Symmetric record with both eyes fixating a common target."""
    left = make_eye((-ipd / 2.0, 0.0, 0.0), target, **eye_kwargs)
    right = make_eye((ipd / 2.0, 0.0, 0.0), target, **eye_kwargs)
    return TrackRecord(frame, frame * 1000.0 / fps, left, right, True)


def make_track(n_frames, video_id="test", label="real", fps=30.0,
               target=(0.0, 0.0, 500.0), **eye_kwargs):
    records = tuple(
        make_record(i, target=target, fps=fps, **eye_kwargs) for i in range(n_frames)
    )
    return Track(video_id, fps, records, label)


@pytest.fixture
def fixating_track():
    return make_track(100)
