import dataclasses

import numpy as np
import pytest

from gazesig.errors import EmptyPerturbationList
from gazesig.geometry import geo_frame
from gazesig.synth import (
    FakePerturbation,
    SynthConfig,
    add_angular_noise,
    gen_fake_track,
    gen_real_track,
)


def rho_hats(track):
    return np.array([geo_frame(r).vergence.rho_hat for r in track.records])


def gaze_array(track, side="left"):
    attr = "left" if side == "left" else "right"
    return np.array([getattr(r, attr).gaze_dir for r in track.records])


def test_noiseless_real_track_converges_exactly():
    cfg = SynthConfig(seed=1, gaze_noise_deg=0.0, n_frames=60)
    track = gen_real_track(cfg)
    for rec in track.records:
        sol = geo_frame(rec).vergence
        assert sol.rho_hat <= 1e-9
        assert not sol.degenerate
        assert sol.t_left > 0 and sol.t_right > 0
        # fixation point sits inside the target volume, in front of the eyes
        assert 290.0 <= sol.rho[2] <= 810.0


def test_real_track_basic_fields():
    cfg = SynthConfig(seed=2, n_frames=50)
    track = gen_real_track(cfg, video_id="abc")
    assert track.video_id == "abc"
    assert track.label == "real"
    assert len(track.records) == 50
    assert all(r.valid for r in track.records)
    assert [r.frame_index for r in track.records] == list(range(50))
    for rec in track.records:
        for eye in (rec.left, rec.right):
            assert eye.pupil_area <= eye.iris_area <= eye.eye_area
            assert np.linalg.norm(eye.gaze_dir) == pytest.approx(1.0, abs=1e-9)


def test_determinism():
    cfg = SynthConfig(seed=7)
    assert gen_real_track(cfg) == gen_real_track(cfg)
    perts = [FakePerturbation("noise", 1.0), FakePerturbation("asymmetry", 20.0)]
    assert gen_fake_track(cfg, perts) == gen_fake_track(cfg, perts)
    assert gen_real_track(SynthConfig(seed=8)) != gen_real_track(cfg)


def test_fake_shares_schedule_with_paired_real():
    # color_drift leaves gaze untouched, so the fake's gaze must equal the
    # paired real track's frame for frame
    cfg = SynthConfig(seed=5)
    real = gen_real_track(cfg)
    fake = gen_fake_track(cfg, [FakePerturbation("color_drift", 3.0)])
    assert fake.label == "fake"
    assert np.allclose(gaze_array(real), gaze_array(fake), atol=0)


def test_fixation_count_bounds():
    # 1000 frames at 30 fps with 200-400 ms fixations and 20-80 ms saccades:
    # each cycle spans 7..15 frames, so between 66 and 143 fixations
    cfg = SynthConfig(seed=3, n_frames=1000, gaze_noise_deg=0.0)
    track = gen_real_track(cfg)
    gaze = gaze_array(track)
    # count distinct fixation plateaus via runs of identical gaze
    changes = np.any(np.diff(gaze, axis=0) != 0, axis=1)
    runs = 1 + np.count_nonzero(np.diff(changes.astype(int)) == -1)
    assert 40 <= runs <= 160


def test_empty_perturbation_list():
    with pytest.raises(EmptyPerturbationList):
        gen_fake_track(SynthConfig(seed=0), [])


def test_bad_perturbation_rejected():
    with pytest.raises(ValueError):
        FakePerturbation("melt", 1.0)
    with pytest.raises(ValueError):
        FakePerturbation("noise", -1.0)


def test_asymmetry_strength_bounds():
    cfg = SynthConfig(seed=11, n_frames=300)
    fake = gen_fake_track(cfg, [FakePerturbation("asymmetry", 30.0)])
    real = gen_real_track(cfg)
    iris_diff = np.array([
        abs(r.left.iris_area - r.right.iris_area) for r in fake.records
    ])
    base_diff = np.array([
        abs(r.left.iris_area - r.right.iris_area) for r in real.records
    ])
    # injected divergence peaks a bit below the requested strength
    assert 0.8 * 30.0 - base_diff.max() <= iris_diff.max() <= 30.0 + base_diff.max()
    assert iris_diff.max() > 5.0 * base_diff.max()


def test_asymmetry_keeps_areas_physical():
    cfg = SynthConfig(seed=13, n_frames=300)
    fake = gen_fake_track(cfg, [FakePerturbation("asymmetry", 100.0)])
    for rec in fake.records:
        assert rec.right.pupil_area >= 0.0
        assert rec.right.pupil_area <= rec.right.iris_area


def test_smooth_reduces_gaze_velocity():
    cfg = SynthConfig(seed=4, n_frames=300)
    real = gen_real_track(cfg)
    fake = gen_fake_track(cfg, [FakePerturbation("smooth", 9.0)])
    v_real = np.linalg.norm(np.diff(gaze_array(real), axis=0), axis=1)
    v_fake = np.linalg.norm(np.diff(gaze_array(fake), axis=0), axis=1)
    assert v_fake.max() < 0.5 * v_real.max()
    assert v_fake.var() < v_real.var()


def test_noise_raises_vergence_error():
    cfg = SynthConfig(seed=6, n_frames=200)
    real = gen_real_track(cfg)
    fake = gen_fake_track(cfg, [FakePerturbation("noise", 2.0)])
    assert rho_hats(fake).mean() > 2.0 * rho_hats(real).mean()


def test_skip_saccades_freezes_frames():
    cfg = SynthConfig(seed=9, n_frames=400, gaze_noise_deg=0.0)
    real = gen_real_track(cfg)
    fake = gen_fake_track(cfg, [FakePerturbation("skip_saccades", 1.0)])
    g_real, g_fake = gaze_array(real), gaze_array(fake)
    frozen = np.all(g_fake[1:] == g_fake[:-1], axis=1)
    assert frozen.sum() > np.all(g_real[1:] == g_real[:-1], axis=1).sum()


def test_color_drift_moves_one_eye_only():
    cfg = SynthConfig(seed=10, n_frames=200, color_jitter_8bit=0.0)
    real = gen_real_track(cfg)
    fake = gen_fake_track(cfg, [FakePerturbation("color_drift", 8.0)])
    left_real = np.array([r.left.iris_rgb for r in real.records])
    left_fake = np.array([r.left.iris_rgb for r in fake.records])
    right_real = np.array([r.right.iris_rgb for r in real.records])
    right_fake = np.array([r.right.iris_rgb for r in fake.records])
    assert np.allclose(left_real, left_fake, atol=1e-9)
    assert np.max(np.abs(right_real - right_fake)) > 1.0


def test_default_noise_keeps_vergence_small():
    # at the default 0.2 degrees the vergence gap stays well under the
    # interpupillary distance for nearly every frame
    cfg = SynthConfig(seed=12, n_frames=300)
    gaps = rho_hats(gen_real_track(cfg))
    assert np.mean(gaps < 32.0) >= 0.99


def test_add_angular_noise():
    cfg = SynthConfig(seed=14, n_frames=100, gaze_noise_deg=0.0)
    track = gen_real_track(cfg)
    noisy = add_angular_noise(track, 0.5, seed=3)
    assert noisy.video_id == track.video_id
    assert len(noisy.records) == len(track.records)
    angles = []
    for a, b in zip(track.records, noisy.records):
        dot = np.clip(np.dot(a.left.gaze_dir, b.left.gaze_dir), -1.0, 1.0)
        angles.append(np.degrees(np.arccos(dot)))
    angles = np.array(angles)
    assert angles.max() > 0.1
    assert angles.mean() < 3.0
    assert add_angular_noise(track, 0.0, seed=3) == track


def test_perturbation_distribution_shift():
    """Each perturbation moves its own summary statistic by at least three
    pooled standard errors over 25 tracks per class."""
    def stats(track, kind):
        if kind == "smooth":
            return np.linalg.norm(np.diff(gaze_array(track), axis=0), axis=1).var()
        if kind == "skip_saccades":
            g = gaze_array(track)
            return np.mean(np.all(g[1:] == g[:-1], axis=1))
        if kind == "noise":
            return np.linalg.norm(np.diff(gaze_array(track), axis=0), axis=1).mean()
        if kind == "asymmetry":
            return np.mean([abs(r.left.iris_area - r.right.iris_area)
                            for r in track.records])
        return np.mean([np.abs(np.subtract(r.left.iris_rgb, r.right.iris_rgb)).sum()
                        for r in track.records])

    for kind, strength in (("noise", 1.5), ("smooth", 7.0), ("asymmetry", 20.0),
                           ("skip_saccades", 0.9), ("color_drift", 6.0)):
        reals, fakes = [], []
        for seed in range(25):
            cfg = SynthConfig(seed=seed, n_frames=120)
            reals.append(stats(gen_real_track(cfg), kind))
            fakes.append(stats(gen_fake_track(
                cfg, [FakePerturbation(kind, strength)]), kind))
        reals, fakes = np.array(reals), np.array(fakes)
        se = np.sqrt(reals.var() / len(reals) + fakes.var() / len(fakes))
        assert abs(fakes.mean() - reals.mean()) > 3.0 * se, kind
