"""Command-line surface: synth, signatures, train, eval, ablate, render.

The functions in this module are plain library calls; main() only parses
arguments and maps failures to exit codes (0 ok, 1 usage, 2 data,
3 internal).
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from . import network, signature, synth, trackio, verdict
from .errors import GazesigError
from .signals import slice_sequences

OMEGA_SWEEP = (16, 32, 64, 128)

# ablation conditions mirroring the feature-set study
ABLATION_CONDITIONS = (
    "all",
    "spectral_only",
    "temporal_only",
    "geometric_only",
    "visual_only",
    "metric_only",
    "raw_gaze",
    "gaze_vectors",
    "metric_and_raw_gaze",
    "no_metric",
    "no_geometric",
)

DEFAULT_FAKE_PERTURBATIONS = (
    synth.FakePerturbation("noise", 1.5),
    synth.FakePerturbation("asymmetry", 30.0),
    synth.FakePerturbation("smooth", 5.0),
)


@dataclass
class RunConfig:
    omega: int = 32
    d_plus_mm: float = signature.DEFAULT_D_PLUS
    split: str = "random_video_70_30"
    scheme: str = verdict.DEFAULT_SCHEME
    seed: int = 0
    feature_mask: tuple = ()  # empty = keep everything
    epochs: int = 100


def condition_mask(name: str) -> np.ndarray:
    """(40, 3) keep mask for a named ablation condition."""
    geo_spectral = tuple(r + 20 for r in signature.RAW_GAZE_ROWS)
    vec_spectral = tuple(r + 20 for r in signature.GAZE_VECTOR_ROWS)
    metric_rows = (16, 17, 18, 19, 36, 37, 38, 39)
    if name == "all":
        return np.ones((signature.N_ROWS, signature.N_CHANNELS), dtype=bool)
    if name == "spectral_only":
        return signature.domain_keep_mask({"spectral"})
    if name == "temporal_only":
        return signature.domain_keep_mask({"temporal"})
    if name == "geometric_only":
        return signature.domain_keep_mask({"geometric"})
    if name == "visual_only":
        return signature.domain_keep_mask({"visual"})
    if name == "metric_only":
        return signature.domain_keep_mask({"metric"})
    if name == "raw_gaze":
        return signature.row_keep_mask(signature.RAW_GAZE_ROWS + geo_spectral)
    if name == "gaze_vectors":
        return signature.row_keep_mask(signature.GAZE_VECTOR_ROWS + vec_spectral)
    if name == "metric_and_raw_gaze":
        return signature.row_keep_mask(
            signature.RAW_GAZE_ROWS + geo_spectral + metric_rows)
    if name == "no_metric":
        return signature.domain_keep_mask({"visual", "geometric"})
    if name == "no_geometric":
        return signature.domain_keep_mask({"visual", "metric"})
    raise ValueError(f"unknown ablation condition {name!r}")


def run_synth(out_dir, n: int, cfg: synth.SynthConfig = None,
              perturbations=DEFAULT_FAKE_PERTURBATIONS, seed: int = 0) -> dict:
    """Write n real + n fake tracks plus a manifest."""
    if n < 1:
        raise ValueError("need n >= 1 tracks per class")
    cfg = cfg or synth.SynthConfig()
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    entries = []
    for i in range(n):
        for label, offset in (("real", 0), ("fake", n)):
            track_seed = seed + offset + i
            c = replace(cfg, seed=track_seed)
            if label == "real":
                track = synth.gen_real_track(c)
            else:
                track = synth.gen_fake_track(c, perturbations)
            path = out_dir / f"{track.video_id}.gzt.jsonl"
            trackio.write_track(track, path)
            entries.append({"video_id": track.video_id, "label": label,
                            "seed": track_seed, "path": path.name})
    manifest = {"n_per_class": n, "seed": seed, "tracks": entries}
    with open(out_dir / "manifest.json", "w", encoding="utf-8") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
    return manifest


def build_signatures(track_dir, omega: int, d_plus: float = signature.DEFAULT_D_PLUS,
                     mask: np.ndarray = None, log=lambda msg: None) -> list:
    """Slice every track in a directory and build its signatures."""
    sigs = []
    paths = sorted(Path(track_dir).glob("*.gzt.jsonl"))
    if not paths:
        raise FileNotFoundError(f"no .gzt.jsonl tracks in {track_dir}")
    for path in paths:
        track = trackio.parse_track(path)
        windows = slice_sequences(track, omega)
        if not windows:
            log(f"warning: no valid sequences in {track.video_id} (omega={omega})")
            continue
        for win in windows:
            sig = signature.build_signature(win, d_plus)
            if mask is not None:
                sig = signature.apply_mask(sig, mask)
            sigs.append(sig)
        log(f"{track.video_id}: {len(windows)} sequences")
    return sigs


def split_videos(video_ids, labels, seed: int, mode: str = "random_video_70_30"):
    """Split by video_id, stratified by label so both classes appear on
    both sides. Returns (train_ids, test_ids) or a list of 5 fold pairs."""
    rng = np.random.default_rng(seed)
    by_label = {}
    for vid, lab in sorted(zip(video_ids, labels)):
        by_label.setdefault(lab, []).append(vid)
    for vids in by_label.values():
        rng.shuffle(vids)
    if mode == "random_video_70_30":
        train, test = set(), set()
        for vids in by_label.values():
            cut = max(1, round(0.7 * len(vids)))
            train.update(vids[:cut])
            test.update(vids[cut:])
        return train, test
    if mode == "kfold_5":
        folds = []
        for k in range(5):
            test = set()
            for vids in by_label.values():
                test.update(vids[k::5])
            train = {v for vids in by_label.values() for v in vids} - test
            folds.append((train, test))
        return folds
    raise ValueError(f"unknown split mode {mode!r}")


def _subset(sigs, ids):
    return [s for s in sigs if s.video_id in ids]


def train_model(sigs, cfg: RunConfig, val_sigs=None):
    tcfg = network.TrainConfig(seed=cfg.seed, omega=cfg.omega, epochs=cfg.epochs)
    return network.train(sigs, tcfg, val=val_sigs)


def evaluate(model, sigs, scheme: str = verdict.DEFAULT_SCHEME) -> dict:
    """Per-sequence and per-video accuracies, verdicts and confusion
    counts for labeled signatures."""
    probs = network.predict_batch(model, sigs)
    seq_correct = sum(
        (p > 0.5) == (s.label == "fake") for p, s in zip(probs, sigs))
    by_video = {}
    truth = {}
    for p, s in zip(probs, sigs):
        by_video.setdefault(s.video_id, []).append(float(p))
        truth[s.video_id] = s.label
    verdicts = [
        verdict.aggregate(ps, scheme, video_id=vid)
        for vid, ps in sorted(by_video.items())
    ]
    confusion = {"tp": 0, "tn": 0, "fp": 0, "fn": 0}
    for v in verdicts:
        if truth[v.video_id] == "fake":
            confusion["tp" if v.label == "fake" else "fn"] += 1
        else:
            confusion["tn" if v.label == "real" else "fp"] += 1
    n_videos = len(verdicts)
    return {
        "scheme": scheme,
        "sequence_accuracy": seq_correct / len(sigs) if sigs else 0.0,
        "video_accuracy": (confusion["tp"] + confusion["tn"]) / n_videos if n_videos else 0.0,
        "confusion": confusion,
        "n_sequences": len(sigs),
        "n_videos": n_videos,
        "verdicts": verdicts,
        "truth": truth,
    }


def write_verdict_report(report: dict, path) -> None:
    """JSON-Lines: one verdict per line, then a summary object."""
    with open(path, "w", encoding="utf-8") as fh:
        for v in report["verdicts"]:
            fh.write(json.dumps({
                "video_id": v.video_id,
                "scheme": v.scheme,
                "score": v.score,
                "label": v.label,
                "true_label": report["truth"][v.video_id],
                "n_sequences": v.n_sequences,
                "sequence_probs": list(v.sequence_probs),
            }, sort_keys=True) + "\n")
        fh.write(json.dumps({"summary": {
            "scheme": report["scheme"],
            "sequence_accuracy": report["sequence_accuracy"],
            "video_accuracy": report["video_accuracy"],
            "confusion": report["confusion"],
            "n_sequences": report["n_sequences"],
            "n_videos": report["n_videos"],
        }}, sort_keys=True) + "\n")


def train_and_eval(sigs, cfg: RunConfig) -> dict:
    """One 70/30 split -> train -> eval on the held-out videos."""
    ids = [s.video_id for s in sigs]
    labels = [s.label for s in sigs]
    train_ids, test_ids = split_videos(ids, labels, cfg.seed, "random_video_70_30")
    model, history = train_model(_subset(sigs, train_ids), cfg)
    report = evaluate(model, _subset(sigs, test_ids), cfg.scheme)
    report["history"] = history
    report["model"] = model
    return report


def run_ablation(track_dir, cfg: RunConfig, log=lambda msg: None) -> dict:
    """The omega sweep and the 11 feature-set conditions."""
    omega_table = []
    for omega in OMEGA_SWEEP:
        sigs = build_signatures(track_dir, omega, cfg.d_plus_mm)
        sub = RunConfig(**{**cfg.__dict__, "omega": omega})
        report = train_and_eval(sigs, sub)
        omega_table.append({
            "omega": omega,
            "s_acc": report["sequence_accuracy"],
            "v_acc": report["video_accuracy"],
        })
        log(f"omega={omega}: S.Acc={report['sequence_accuracy']:.3f} "
            f"V.Acc={report['video_accuracy']:.3f}")

    base_sigs = build_signatures(track_dir, cfg.omega, cfg.d_plus_mm)
    condition_table = []
    for name in ABLATION_CONDITIONS:
        mask = condition_mask(name)
        masked = [signature.apply_mask(s, mask) for s in base_sigs]
        report = train_and_eval(masked, cfg)
        condition_table.append({
            "condition": name,
            "s_acc": report["sequence_accuracy"],
            "v_acc": report["video_accuracy"],
        })
        log(f"{name}: S.Acc={report['sequence_accuracy']:.3f} "
            f"V.Acc={report['video_accuracy']:.3f}")
    return {"omega_table": omega_table, "condition_table": condition_table}


def render_signature_ppm(sig: signature.Signature, path) -> None:
    """40 x omega binary PPM, channels mapped to RGB, values x255 truncated."""
    pixels = (sig.tensor * 255.0).astype(np.uint8)
    with open(path, "wb") as fh:
        fh.write(f"P6\n{sig.omega} {signature.N_ROWS}\n255\n".encode("ascii"))
        fh.write(pixels.tobytes())


def _load_config_file(path) -> dict:
    values = {}
    with open(path, "r", encoding="utf-8") as fh:
        for raw in fh:
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ValueError(f"bad config line: {raw.rstrip()}")
            key, val = (part.strip() for part in line.split("=", 1))
            values[key] = val
    return values


def _build_run_config(args) -> RunConfig:
    cfg = RunConfig()
    file_values = _load_config_file(args.config) if getattr(args, "config", None) else {}
    for key, val in file_values.items():
        if key in ("omega", "seed", "epochs"):
            setattr(cfg, key, int(val))
        elif key == "d_plus_mm":
            cfg.d_plus_mm = float(val)
        elif key in ("split", "scheme"):
            setattr(cfg, key, val)
        elif key == "mask":
            cfg.feature_mask = tuple(v for v in val.split(",") if v)
        else:
            raise ValueError(f"unknown config key {key!r}")
    # CLI flags override file values
    for key in ("omega", "seed", "scheme", "split", "epochs"):
        val = getattr(args, key, None)
        if val is not None:
            setattr(cfg, key, val)
    if getattr(args, "d_plus", None) is not None:
        cfg.d_plus_mm = args.d_plus
    if getattr(args, "mask", None):
        cfg.feature_mask = tuple(args.mask.split(","))
    return cfg


def _parse_perturbations(arg: str):
    perts = []
    for part in arg.split(","):
        if not part:
            continue
        kind, _, strength = part.partition(":")
        perts.append(synth.FakePerturbation(kind, float(strength or 1.0)))
    return perts


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # exit 1 on usage errors, not argparse's 2
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(1)


def _make_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="gazesig", description=__doc__)
    parser.add_argument("--config", help="flat key = value config file")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--seed", type=int, default=None)
        p.add_argument("--omega", type=int, default=None)
        p.add_argument("--scheme", choices=verdict.SCHEMES, default=None)
        p.add_argument("--mask", help="comma list of feature domains to keep")
        p.add_argument("--d-plus", type=float, default=None)
        p.add_argument("--out", required=True)

    p = sub.add_parser("synth", help="generate synthetic real+fake tracks")
    p.add_argument("--n", type=int, required=True, help="tracks per class")
    p.add_argument("--frames", type=int, default=150)
    p.add_argument("--noise-deg", type=float, default=0.2)
    p.add_argument("--perturbations", default="noise:1.5,asymmetry:30,smooth:5")
    common(p)

    p = sub.add_parser("signatures", help="build signatures from tracks")
    p.add_argument("track_dir")
    common(p)

    p = sub.add_parser("train", help="train a classifier on a signature file")
    p.add_argument("sig_file")
    p.add_argument("--split", choices=("random_video_70_30", "kfold_5"), default=None)
    p.add_argument("--epochs", type=int, default=None)
    common(p)

    p = sub.add_parser("eval", help="evaluate a model on a signature file")
    p.add_argument("model_file")
    p.add_argument("sig_file")
    common(p)

    p = sub.add_parser("ablate", help="omega sweep and feature-set conditions")
    p.add_argument("track_dir")
    p.add_argument("--epochs", type=int, default=None)
    common(p)

    p = sub.add_parser("render", help="render signatures as PPM images")
    p.add_argument("sig_file")
    common(p)
    return parser


def _cmd_synth(args, cfg):
    base = synth.SynthConfig(n_frames=args.frames, gaze_noise_deg=args.noise_deg)
    manifest = run_synth(args.out, args.n, base,
                         _parse_perturbations(args.perturbations), seed=cfg.seed)
    print(f"wrote {2 * manifest['n_per_class']} tracks to {args.out}")


def _cmd_signatures(args, cfg):
    mask = signature.domain_keep_mask(cfg.feature_mask) if cfg.feature_mask else None
    sigs = build_signatures(args.track_dir, cfg.omega, cfg.d_plus_mm, mask,
                            log=lambda m: print(m, file=sys.stderr))
    signature.write_signatures(sigs, args.out)
    print(f"wrote {len(sigs)} signatures to {args.out}")


def _cmd_train(args, cfg):
    sigs = signature.read_signatures(args.sig_file)
    if not sigs:
        raise GazesigError(f"{args.sig_file} contains no signatures")
    cfg.omega = sigs[0].omega
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    ids = [s.video_id for s in sigs]
    labels = [s.label for s in sigs]
    if cfg.split == "kfold_5":
        folds = split_videos(ids, labels, cfg.seed, "kfold_5")
        accs = []
        metrics = {"folds": []}
        for k, (train_ids, test_ids) in enumerate(folds):
            model, history = train_model(_subset(sigs, train_ids), cfg)
            report = evaluate(model, _subset(sigs, test_ids), cfg.scheme)
            network.save_model(model, out / f"model_fold{k}.gzmd")
            accs.append(report["video_accuracy"])
            metrics["folds"].append({
                "fold": k,
                "video_accuracy": report["video_accuracy"],
                "sequence_accuracy": report["sequence_accuracy"],
                "history": history,
            })
        metrics["video_accuracy_mean"] = float(np.mean(accs))
        metrics["video_accuracy_std"] = float(np.std(accs))
        print(f"kfold_5 video accuracy: mean {metrics['video_accuracy_mean']:.4f} "
              f"std {metrics['video_accuracy_std']:.4f}")
    else:
        train_ids, test_ids = split_videos(ids, labels, cfg.seed, cfg.split)
        model, history = train_model(_subset(sigs, train_ids), cfg,
                                     val_sigs=_subset(sigs, test_ids))
        network.save_model(model, out / "model.gzmd")
        report = evaluate(model, _subset(sigs, test_ids), cfg.scheme)
        metrics = {
            "history": history,
            "video_accuracy": report["video_accuracy"],
            "sequence_accuracy": report["sequence_accuracy"],
        }
        print(f"video accuracy {report['video_accuracy']:.4f}, "
              f"sequence accuracy {report['sequence_accuracy']:.4f}")
    with open(out / "metrics.json", "w", encoding="utf-8") as fh:
        json.dump(metrics, fh, indent=2, sort_keys=True)


def _cmd_eval(args, cfg):
    model = network.load_model(args.model_file)
    sigs = signature.read_signatures(args.sig_file)
    report = evaluate(model, sigs, cfg.scheme)
    write_verdict_report(report, args.out)
    print(f"S.Acc {report['sequence_accuracy']:.4f}  V.Acc {report['video_accuracy']:.4f}")


def _cmd_ablate(args, cfg):
    tables = run_ablation(args.track_dir, cfg,
                          log=lambda m: print(m, file=sys.stderr))
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    with open(out / "ablation.json", "w", encoding="utf-8") as fh:
        json.dump(tables, fh, indent=2, sort_keys=True)
    print(f"{'omega':>10}  {'S.Acc':>7}  {'V.Acc':>7}")
    for row in tables["omega_table"]:
        print(f"{row['omega']:>10}  {row['s_acc']:7.4f}  {row['v_acc']:7.4f}")
    print(f"{'condition':>20}  {'S.Acc':>7}  {'V.Acc':>7}")
    for row in tables["condition_table"]:
        print(f"{row['condition']:>20}  {row['s_acc']:7.4f}  {row['v_acc']:7.4f}")


def _cmd_render(args, cfg):
    sigs = signature.read_signatures(args.sig_file)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    for i, sig in enumerate(sigs):
        render_signature_ppm(sig, out / f"{sig.video_id}_{sig.start_frame:06d}.ppm")
    print(f"rendered {len(sigs)} signatures to {out}")


_COMMANDS = {
    "synth": _cmd_synth,
    "signatures": _cmd_signatures,
    "train": _cmd_train,
    "eval": _cmd_eval,
    "ablate": _cmd_ablate,
    "render": _cmd_render,
}


def main(argv=None) -> int:
    parser = _make_parser()
    try:
        args = parser.parse_args(argv)
        cfg = _build_run_config(args)
    except SystemExit as exc:
        return exc.code if isinstance(exc.code, int) else 1
    except ValueError as exc:
        print(f"gazesig: {exc}", file=sys.stderr)
        return 1
    try:
        _COMMANDS[args.command](args, cfg)
    except (GazesigError, OSError, FileNotFoundError, ValueError) as exc:
        print(f"gazesig: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:  # invariant violation
        print(f"gazesig: internal error: {exc}", file=sys.stderr)
        return 3
    return 0


if __name__ == "__main__":
    sys.exit(main())
