import json

import numpy as np
import pytest

from gazesig import signature
from gazesig.cli import (
    ABLATION_CONDITIONS,
    RunConfig,
    build_signatures,
    condition_mask,
    evaluate,
    main,
    render_signature_ppm,
    run_synth,
    split_videos,
    write_verdict_report,
)
from gazesig.network import init_model
from gazesig.signature import Signature


@pytest.fixture(scope="module")
def track_dir(tmp_path_factory):
    out = tmp_path_factory.mktemp("tracks")
    run_synth(out, 3, seed=0)
    return out


def test_run_synth_manifest(track_dir):
    manifest = json.loads((track_dir / "manifest.json").read_text())
    assert manifest["n_per_class"] == 3
    assert len(manifest["tracks"]) == 6
    labels = [t["label"] for t in manifest["tracks"]]
    assert labels.count("real") == 3 and labels.count("fake") == 3
    for entry in manifest["tracks"]:
        assert (track_dir / entry["path"]).exists()


def test_run_synth_deterministic(tmp_path):
    run_synth(tmp_path / "a", 2, seed=5)
    run_synth(tmp_path / "b", 2, seed=5)
    for path in sorted((tmp_path / "a").iterdir()):
        assert path.read_bytes() == (tmp_path / "b" / path.name).read_bytes()


def test_run_synth_rejects_zero():
    with pytest.raises(ValueError):
        run_synth("/tmp/unused", 0)


def test_build_signatures_counts(track_dir):
    # 150-frame tracks, omega=32 -> 4 windows per track, 6 tracks
    sigs = build_signatures(track_dir, 32)
    assert len(sigs) == 24
    assert all(s.tensor.shape == (40, 32, 3) for s in sigs)
    labels = {s.label for s in sigs}
    assert labels == {"real", "fake"}


def test_build_signatures_omega_too_long(track_dir, capsys):
    warnings = []
    sigs = build_signatures(track_dir, 256, log=warnings.append)
    assert sigs == []
    assert len(warnings) == 6
    assert all("no valid sequences" in w for w in warnings)


def test_build_signatures_empty_dir(tmp_path):
    with pytest.raises(FileNotFoundError):
        build_signatures(tmp_path, 32)


def test_build_signatures_mask_applied(track_dir):
    mask = condition_mask("metric_only")
    sigs = build_signatures(track_dir, 32, mask=mask)
    t = sigs[0].tensor
    assert np.allclose(t[:16], 0.0)
    assert np.allclose(t[20:36], 0.0)
    assert t[16:20].max() > 0.0


def test_condition_masks_cover_all_names():
    for name in ABLATION_CONDITIONS:
        mask = condition_mask(name)
        assert mask.shape == (40, 3)
        assert mask.any()
    assert condition_mask("all").all()
    with pytest.raises(ValueError):
        condition_mask("nope")


def test_condition_mask_gaze_vectors():
    mask = condition_mask("gaze_vectors")
    kept = {r for r in range(40) if mask[r].any()}
    assert kept == {9, 10, 29, 30}


def test_split_videos_stratified():
    ids = [f"r{i}" for i in range(10)] + [f"f{i}" for i in range(10)]
    labels = ["real"] * 10 + ["fake"] * 10
    train, test = split_videos(ids, labels, seed=0)
    assert train.isdisjoint(test)
    assert len(train) == 14 and len(test) == 6
    for part in (train, test):
        assert any(v.startswith("r") for v in part)
        assert any(v.startswith("f") for v in part)


def test_split_videos_kfold():
    ids = [f"v{i}" for i in range(10)]
    labels = ["real", "fake"] * 5
    folds = split_videos(ids, labels, seed=1, mode="kfold_5")
    assert len(folds) == 5
    all_test = set()
    for train, test in folds:
        assert train.isdisjoint(test)
        assert train | test == set(ids)
        all_test |= test
    assert all_test == set(ids)


def test_split_videos_unknown_mode():
    with pytest.raises(ValueError):
        split_videos(["a"], ["real"], 0, mode="loocv")


def test_evaluate_and_report(tmp_path):
    rng = np.random.default_rng(0)
    model = init_model(16, seed=0)
    sigs = [
        Signature(rng.uniform(0, 1, (40, 16, 3)).astype(np.float32), 16,
                  f"v{i % 3}", 32 * i, "real" if i % 3 else "fake")
        for i in range(9)
    ]
    report = evaluate(model, sigs)
    assert report["n_videos"] == 3
    assert report["n_sequences"] == 9
    assert 0.0 <= report["video_accuracy"] <= 1.0
    c = report["confusion"]
    assert c["tp"] + c["tn"] + c["fp"] + c["fn"] == 3
    path = tmp_path / "report.jsonl"
    write_verdict_report(report, path)
    lines = [json.loads(line) for line in path.read_text().splitlines()]
    assert len(lines) == 4
    assert "summary" in lines[-1]
    assert {l["video_id"] for l in lines[:-1]} == {"v0", "v1", "v2"}


def test_render_ppm(tmp_path):
    t = np.zeros((40, 16, 3), np.float32)
    t[0, 0, 0] = signature.CLAMP_MAX
    sig = Signature(t, 16, "v", 0, "real")
    path = tmp_path / "s.ppm"
    render_signature_ppm(sig, path)
    raw = path.read_bytes()
    header = b"P6\n16 40\n255\n"
    assert raw.startswith(header)
    pixels = raw[len(header):]
    assert len(pixels) == 40 * 16 * 3
    assert pixels[0] == 254  # truncation keeps the max strictly below 255
    assert set(pixels[1:]) == {0}


# ------------------------------------------------------- main() end to end

def test_main_full_pipeline(tmp_path, capsys):
    tracks = tmp_path / "tracks"
    assert main(["synth", "--n", "3", "--frames", "100", "--seed", "1",
                 "--out", str(tracks)]) == 0
    assert "wrote 6 tracks" in capsys.readouterr().out

    sig_file = tmp_path / "sigs.gzsg"
    assert main(["signatures", str(tracks), "--omega", "32",
                 "--out", str(sig_file)]) == 0
    # 100 frames -> 3 windows per track
    assert "wrote 18 signatures" in capsys.readouterr().out

    run_dir = tmp_path / "run"
    assert main(["train", str(sig_file), "--epochs", "8", "--seed", "0",
                 "--out", str(run_dir)]) == 0
    assert (run_dir / "model.gzmd").exists()
    assert (run_dir / "metrics.json").exists()

    report = tmp_path / "verdicts.jsonl"
    assert main(["eval", str(run_dir / "model.gzmd"), str(sig_file),
                 "--out", str(report)]) == 0
    assert "V.Acc" in capsys.readouterr().out
    lines = report.read_text().splitlines()
    assert "summary" in lines[-1]

    ppm_dir = tmp_path / "ppm"
    assert main(["render", str(sig_file), "--out", str(ppm_dir)]) == 0
    assert len(list(ppm_dir.glob("*.ppm"))) == 18


def test_main_usage_error_exit_1(capsys):
    assert main([]) == 1
    assert main(["synth", "--out", "/tmp/x"]) == 1  # missing --n
    assert main(["frobnicate"]) == 1
    capsys.readouterr()


def test_main_data_error_exit_2(tmp_path, capsys):
    missing = tmp_path / "empty"
    missing.mkdir()
    assert main(["signatures", str(missing), "--out", str(tmp_path / "s.gzsg")]) == 2
    bad = tmp_path / "bad.gzsg"
    bad.write_bytes(b"garbage header")
    assert main(["render", str(bad), "--out", str(tmp_path / "ppm")]) == 2
    assert main(["synth", "--n", "0", "--out", str(tmp_path / "t")]) == 2
    capsys.readouterr()


def test_main_config_file_and_override(tmp_path, capsys):
    tracks = tmp_path / "tracks"
    run_synth(tracks, 2, seed=0)
    cfg_file = tmp_path / "run.cfg"
    cfg_file.write_text("omega = 16  # window length\nseed = 4\n")
    out16 = tmp_path / "s16.gzsg"
    assert main(["--config", str(cfg_file), "signatures", str(tracks),
                 "--out", str(out16)]) == 0
    assert signature.read_signatures(out16)[0].omega == 16
    # the flag wins over the file value
    out32 = tmp_path / "s32.gzsg"
    assert main(["--config", str(cfg_file), "signatures", str(tracks),
                 "--omega", "32", "--out", str(out32)]) == 0
    assert signature.read_signatures(out32)[0].omega == 32
    capsys.readouterr()


def test_main_bad_config_key(tmp_path, capsys):
    cfg_file = tmp_path / "bad.cfg"
    cfg_file.write_text("omeag = 16\n")
    assert main(["--config", str(cfg_file), "signatures", "x",
                 "--out", "/tmp/x"]) == 1
    capsys.readouterr()


def test_main_mask_flag(tmp_path, capsys):
    tracks = tmp_path / "tracks"
    run_synth(tracks, 1, seed=0)
    out = tmp_path / "m.gzsg"
    assert main(["signatures", str(tracks), "--omega", "32", "--mask", "metric",
                 "--out", str(out)]) == 0
    t = signature.read_signatures(out)[0].tensor
    assert np.allclose(t[:16], 0.0)
    assert t[16:20].max() > 0.0
    capsys.readouterr()


def test_run_config_defaults():
    cfg = RunConfig()
    assert cfg.omega == 32
    assert cfg.scheme == "log_odds"
    assert cfg.split == "random_video_70_30"
    assert cfg.epochs == 100
