import dataclasses

import numpy as np
import pytest
from skimage.color import lab2rgb, rgb2lab

from gazesig.errors import InvalidRecord, OutOfRangeChannel
from gazesig.visual import LabColor, lab_to_srgb, srgb_to_lab, visual_frame

from conftest import make_record


def skimage_lab(rgb):
    out = rgb2lab(np.asarray(rgb, dtype=np.float64).reshape(1, 1, 3) / 255.0)
    return out.reshape(3)


def test_reference_white():
    lab = srgb_to_lab((255, 255, 255))
    # the rounded D65 constants put white a hair off exactly 100
    assert lab.L == pytest.approx(100.0, abs=1e-4)
    assert lab.a == pytest.approx(0.0, abs=1e-3)
    assert lab.b == pytest.approx(0.0, abs=1e-3)


def test_reference_black():
    lab = srgb_to_lab((0, 0, 0))
    assert lab.L == pytest.approx(0.0, abs=1e-9)
    assert lab.a == pytest.approx(0.0, abs=1e-9)
    assert lab.b == pytest.approx(0.0, abs=1e-9)


def test_purple_against_skimage():
    lab = srgb_to_lab((128, 64, 200))
    ref = skimage_lab((128, 64, 200))
    assert lab.L == pytest.approx(ref[0], abs=1e-2)
    assert lab.a == pytest.approx(ref[1], abs=1e-2)
    assert lab.b == pytest.approx(ref[2], abs=1e-2)


def test_random_colors_against_skimage():
    rng = np.random.default_rng(8)
    for rgb in rng.uniform(0, 255, size=(50, 3)):
        lab = srgb_to_lab(rgb)
        ref = skimage_lab(rgb)
        assert np.allclose([lab.L, lab.a, lab.b], ref, atol=1e-2)


def test_lab_round_trip():
    rng = np.random.default_rng(13)
    for rgb in rng.uniform(0, 255, size=(30, 3)):
        back = lab_to_srgb(srgb_to_lab(rgb))
        assert np.allclose(back, rgb, atol=1e-6)


def test_lab_to_srgb_against_skimage():
    lab = LabColor(55.0, 20.0, -35.0)
    ref = lab2rgb(np.array([[list((lab.L, lab.a, lab.b))]])).reshape(3) * 255.0
    assert np.allclose(lab_to_srgb(lab), ref, atol=5e-2)


def test_encode_8bit_range():
    rng = np.random.default_rng(5)
    for rgb in rng.uniform(0, 255, size=(30, 3)):
        enc = srgb_to_lab(rgb).encode_8bit()
        assert np.all(enc >= 0.0)
        assert np.all(enc < 256.0)


@pytest.mark.parametrize("rgb", [(-1, 0, 0), (0, 256, 0), (0, 0, 1000)])
def test_out_of_range_channel(rgb):
    with pytest.raises(OutOfRangeChannel):
        srgb_to_lab(rgb)


def test_wrong_shape_rejected():
    with pytest.raises(OutOfRangeChannel):
        srgb_to_lab((10, 20))


def test_visual_frame_diffs_zero_for_identical_eyes():
    vf = visual_frame(make_record(0))
    assert np.allclose(vf.iris_color_diff, 0.0)
    assert np.allclose(vf.pupil_color_diff, 0.0)
    assert vf.area_iris_l == vf.area_iris_r == 140.0


def test_visual_frame_swap_equivariance():
    from gazesig.trackio import swap_lr
    rec = make_record(0)
    rec = dataclasses.replace(
        rec, left=dataclasses.replace(rec.left, iris_rgb=(150.0, 90.0, 40.0)))
    a = visual_frame(rec)
    b = visual_frame(swap_lr(rec))
    assert a.iris_color_l == b.iris_color_r
    assert a.iris_color_r == b.iris_color_l
    assert np.allclose(a.iris_color_diff, b.iris_color_diff)
    assert a.area_eye_l == b.area_eye_r


def test_visual_frame_diff_is_abs_lab8():
    rec = make_record(0)
    rec = dataclasses.replace(
        rec, left=dataclasses.replace(rec.left, iris_rgb=(150.0, 90.0, 40.0)))
    vf = visual_frame(rec)
    expect = np.abs(srgb_to_lab((150, 90, 40)).encode_8bit()
                    - srgb_to_lab((101, 66, 38)).encode_8bit())
    assert np.allclose(vf.iris_color_diff, expect)


def test_visual_frame_rejects_invalid():
    rec = dataclasses.replace(make_record(0), valid=False)
    with pytest.raises(InvalidRecord):
        visual_frame(rec)
