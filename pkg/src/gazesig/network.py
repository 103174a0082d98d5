"""From-scratch dense classifier over signatures.

Layer stack: Flatten -> BatchNorm -> Dense(256) -> BatchNorm -> LeakyReLU
-> Dropout -> Dense(128) -> BatchNorm -> LeakyReLU -> Dropout -> Dense(64)
-> Dense(2) -> Sigmoid. Loss is per-node sigmoid binary cross-entropy
against one-hot (real, fake) targets; everything (init, shuffling, dropout)
is driven by a single seeded generator so training is bit-reproducible.
"""

from __future__ import annotations

import json
import struct
from dataclasses import asdict, dataclass, field

import numpy as np

from .errors import (BadMagic, MixedOmega, ShapeMismatch, SingleClassDataset,
                     VersionMismatch)
from .signature import N_CHANNELS, N_ROWS, Signature

BN_EPS = 1e-5
BN_MOMENTUM = 0.99
ADAM_BETA1 = 0.9
ADAM_BETA2 = 0.999
ADAM_EPS = 1e-8
PROB_EPS = 1e-12

_HIDDEN = (256, 128, 64, 2)


@dataclass
class TrainConfig:
    learning_rate: float = 1e-4
    batch_size: int = 32
    epochs: int = 100
    validate_every: int = 10
    dropout_p: float = 0.3
    leaky_slope: float = 0.2
    seed: int = 0
    omega: int = 32

    def __post_init__(self):
        if not 0 <= self.dropout_p < 1:
            raise ValueError("dropout_p must be in [0, 1)")
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")


# parameter entry names, in serialization order
_PARAM_NAMES = (
    "bn0_gamma", "bn0_beta",
    "w1", "b1", "bn1_gamma", "bn1_beta",
    "w2", "b2", "bn2_gamma", "bn2_beta",
    "w3", "b3",
    "w4", "b4",
)
_STAT_NAMES = ("bn0_mean", "bn0_var", "bn1_mean", "bn1_var", "bn2_mean", "bn2_var")


@dataclass
class ModelState:
    omega: int
    seed: int
    params: dict
    stats: dict
    adam_m: dict
    adam_v: dict
    step: int = 0
    cfg: TrainConfig = field(default_factory=TrainConfig)
    rng: np.random.Generator = None

    @property
    def input_dim(self) -> int:
        return N_ROWS * self.omega * N_CHANNELS


def _glorot(rng, fan_in, fan_out, dtype):
    limit = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-limit, limit, size=(fan_in, fan_out)).astype(dtype)


def init_model(omega: int, seed: int, cfg: TrainConfig | None = None,
               dtype=np.float32) -> ModelState:
    """Fresh model: glorot-uniform weights, zero biases, BN scale 1/shift 0."""
    cfg = cfg or TrainConfig(seed=seed, omega=omega)
    rng = np.random.default_rng(seed)
    dims = (N_ROWS * omega * N_CHANNELS,) + _HIDDEN
    params = {}
    params["bn0_gamma"] = np.ones(dims[0], dtype)
    params["bn0_beta"] = np.zeros(dims[0], dtype)
    for i in range(4):
        params[f"w{i + 1}"] = _glorot(rng, dims[i], dims[i + 1], dtype)
        params[f"b{i + 1}"] = np.zeros(dims[i + 1], dtype)
    for i, d in ((1, dims[1]), (2, dims[2])):
        params[f"bn{i}_gamma"] = np.ones(d, dtype)
        params[f"bn{i}_beta"] = np.zeros(d, dtype)
    stats = {}
    for name, d in (("bn0", dims[0]), ("bn1", dims[1]), ("bn2", dims[2])):
        stats[f"{name}_mean"] = np.zeros(d, dtype)
        stats[f"{name}_var"] = np.ones(d, dtype)
    adam_m = {k: np.zeros_like(v) for k, v in params.items()}
    adam_v = {k: np.zeros_like(v) for k, v in params.items()}
    return ModelState(omega, seed, params, stats, adam_m, adam_v, 0, cfg, rng)


def _bn_forward(x, gamma, beta, mean, var, train, stats, name):
    if train:
        mu = x.mean(axis=0, dtype=np.float64).astype(x.dtype)
        sigma2 = x.var(axis=0, dtype=np.float64).astype(x.dtype)
        if stats is not None:
            stats[f"{name}_mean"] = (BN_MOMENTUM * stats[f"{name}_mean"]
                                     + (1.0 - BN_MOMENTUM) * mu).astype(x.dtype)
            stats[f"{name}_var"] = (BN_MOMENTUM * stats[f"{name}_var"]
                                    + (1.0 - BN_MOMENTUM) * sigma2).astype(x.dtype)
    else:
        mu, sigma2 = mean, var
    inv_std = 1.0 / np.sqrt(sigma2 + BN_EPS)
    xhat = (x - mu) * inv_std
    return gamma * xhat + beta, (xhat, inv_std)


def _leaky(x, slope):
    return np.where(x >= 0, x, slope * x)


def _sigmoid(x):
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


def _forward_batch(model: ModelState, x, train: bool, dropout: bool,
                   update_stats: bool):
    """Run the stack on a (N, D) batch; returns probabilities and a cache
    for the backward pass."""
    p = model.params
    s = model.stats
    slope = model.cfg.leaky_slope
    drop_p = model.cfg.dropout_p if dropout else 0.0
    stats_sink = s if (train and update_stats) else None
    cache = {"x": x, "train": train}

    h0, cache["bn0"] = _bn_forward(x, p["bn0_gamma"], p["bn0_beta"],
                                   s["bn0_mean"], s["bn0_var"], train, stats_sink, "bn0")
    cache["h0"] = h0
    z1 = h0 @ p["w1"] + p["b1"]
    cache["z1"] = z1
    n1, cache["bn1"] = _bn_forward(z1, p["bn1_gamma"], p["bn1_beta"],
                                   s["bn1_mean"], s["bn1_var"], train, stats_sink, "bn1")
    cache["n1"] = n1
    a1 = _leaky(n1, slope)
    if drop_p > 0:
        mask1 = (model.rng.random(a1.shape) >= drop_p) / (1.0 - drop_p)
        a1 = a1 * mask1.astype(a1.dtype)
    else:
        mask1 = None
    cache["mask1"], cache["a1"] = mask1, a1

    z2 = a1 @ p["w2"] + p["b2"]
    cache["z2"] = z2
    n2, cache["bn2"] = _bn_forward(z2, p["bn2_gamma"], p["bn2_beta"],
                                   s["bn2_mean"], s["bn2_var"], train, stats_sink, "bn2")
    cache["n2"] = n2
    a2 = _leaky(n2, slope)
    if drop_p > 0:
        mask2 = (model.rng.random(a2.shape) >= drop_p) / (1.0 - drop_p)
        a2 = a2 * mask2.astype(a2.dtype)
    else:
        mask2 = None
    cache["mask2"], cache["a2"] = mask2, a2

    z3 = a2 @ p["w3"] + p["b3"]
    cache["z3"] = z3
    z4 = z3 @ p["w4"] + p["b4"]
    probs = _sigmoid(z4)
    cache["probs"] = probs
    return probs, cache


def _bn_backward(dy, gamma, bn_cache):
    xhat, inv_std = bn_cache
    dgamma = np.sum(dy * xhat, axis=0, dtype=np.float64).astype(dy.dtype)
    dbeta = np.sum(dy, axis=0, dtype=np.float64).astype(dy.dtype)
    dxhat = dy * gamma
    dx = inv_std * (
        dxhat
        - dxhat.mean(axis=0, dtype=np.float64).astype(dy.dtype)
        - xhat * np.mean(dxhat * xhat, axis=0, dtype=np.float64).astype(dy.dtype)
    )
    return dx, dgamma, dbeta


def _backward_batch(model: ModelState, cache, y):
    """Gradients of mean per-node BCE w.r.t. every trainable parameter."""
    p = model.params
    slope = model.cfg.leaky_slope
    probs = cache["probs"]
    n = probs.shape[0]
    grads = {}

    dz4 = (probs - y) / (n * probs.shape[1])
    grads["w4"] = cache["z3"].T @ dz4
    grads["b4"] = np.sum(dz4, axis=0, dtype=np.float64).astype(dz4.dtype)
    dz3 = dz4 @ p["w4"].T
    grads["w3"] = cache["a2"].T @ dz3
    grads["b3"] = np.sum(dz3, axis=0, dtype=np.float64).astype(dz3.dtype)

    da2 = dz3 @ p["w3"].T
    if cache["mask2"] is not None:
        da2 = da2 * cache["mask2"].astype(da2.dtype)
    dn2 = da2 * np.where(cache["n2"] >= 0, 1.0, slope).astype(da2.dtype)
    dz2, grads["bn2_gamma"], grads["bn2_beta"] = _bn_backward(dn2, p["bn2_gamma"], cache["bn2"])
    grads["w2"] = cache["a1"].T @ dz2
    grads["b2"] = np.sum(dz2, axis=0, dtype=np.float64).astype(dz2.dtype)

    da1 = dz2 @ p["w2"].T
    if cache["mask1"] is not None:
        da1 = da1 * cache["mask1"].astype(da1.dtype)
    dn1 = da1 * np.where(cache["n1"] >= 0, 1.0, slope).astype(da1.dtype)
    dz1, grads["bn1_gamma"], grads["bn1_beta"] = _bn_backward(dn1, p["bn1_gamma"], cache["bn1"])
    grads["w1"] = cache["h0"].T @ dz1
    grads["b1"] = np.sum(dz1, axis=0, dtype=np.float64).astype(dz1.dtype)

    dh0 = dz1 @ p["w1"].T
    _, grads["bn0_gamma"], grads["bn0_beta"] = _bn_backward(dh0, p["bn0_gamma"], cache["bn0"])
    return grads


def _bce_loss(probs, y):
    p = np.clip(probs.astype(np.float64), PROB_EPS, 1.0 - PROB_EPS)
    return float(-np.mean(y * np.log(p) + (1.0 - y) * np.log(1.0 - p), dtype=np.float64))


def _adam_update(model: ModelState, grads, lr):
    model.step += 1
    t = model.step
    c1 = 1.0 - ADAM_BETA1 ** t
    c2 = 1.0 - ADAM_BETA2 ** t
    for name in _PARAM_NAMES:
        g = grads[name]
        m = model.adam_m[name]
        v = model.adam_v[name]
        m[...] = ADAM_BETA1 * m + (1.0 - ADAM_BETA1) * g
        v[...] = ADAM_BETA2 * v + (1.0 - ADAM_BETA2) * g * g
        model.params[name] -= (lr * (m / c1) / (np.sqrt(v / c2) + ADAM_EPS)).astype(
            model.params[name].dtype)


def _flatten(sig: Signature, dtype=np.float32):
    return sig.tensor.reshape(-1).astype(dtype)


def _check_omega(model: ModelState, sig: Signature):
    if sig.omega != model.omega:
        raise ShapeMismatch(f"signature omega {sig.omega} != model omega {model.omega}")


def forward(model: ModelState, sig: Signature, mode: str = "infer"):
    """Run one signature through the network; returns (s_real, s_fake)."""
    if mode not in ("train", "infer"):
        raise ValueError("mode must be 'train' or 'infer'")
    _check_omega(model, sig)
    x = _flatten(sig)[None, :]
    train = mode == "train"
    probs, _ = _forward_batch(model, x, train=train, dropout=train, update_stats=False)
    return float(probs[0, 0]), float(probs[0, 1])


def predict_sequence(model: ModelState, sig: Signature) -> float:
    """Fake confidence: s_fake normalized against both sigmoid outputs."""
    s_real, s_fake = forward(model, sig, mode="infer")
    return s_fake / (s_real + s_fake + PROB_EPS)


def predict_batch(model: ModelState, sigs) -> np.ndarray:
    """Vectorized inference-mode fake confidences for a list of signatures."""
    if not sigs:
        return np.zeros(0)
    for sig in sigs:
        _check_omega(model, sig)
    x = np.stack([_flatten(s) for s in sigs])
    probs, _ = _forward_batch(model, x, train=False, dropout=False, update_stats=False)
    return probs[:, 1] / (probs[:, 0] + probs[:, 1] + PROB_EPS)


def _targets(sigs, dtype=np.float32):
    # one-hot over (real, fake)
    y = np.zeros((len(sigs), 2), dtype)
    for i, sig in enumerate(sigs):
        y[i, 0 if sig.label == "real" else 1] = 1.0
    return y


def train(dataset, cfg: TrainConfig, val=None):
    """Train a fresh model on labeled signatures.

    Returns (model, history) where history holds the per-epoch mean train
    loss and, every cfg.validate_every epochs, sequence accuracies.
    """
    labels = {sig.label for sig in dataset}
    if not {"real", "fake"} <= labels:
        raise SingleClassDataset(f"need both classes, got {sorted(labels)}")
    omegas = {sig.omega for sig in dataset}
    if len(omegas) != 1:
        raise MixedOmega(f"signatures mix omegas {sorted(omegas)}")
    if cfg.omega not in omegas:
        cfg = TrainConfig(**{**asdict(cfg), "omega": omegas.pop()})

    model = init_model(cfg.omega, cfg.seed, cfg)
    x_all = np.stack([_flatten(s) for s in dataset])
    y_all = _targets(dataset)
    n = len(dataset)
    history = []
    for epoch in range(1, cfg.epochs + 1):
        perm = model.rng.permutation(n)
        losses = []
        for start in range(0, n, cfg.batch_size):
            idx = perm[start:start + cfg.batch_size]
            xb, yb = x_all[idx], y_all[idx]
            probs, cache = _forward_batch(model, xb, train=True, dropout=True,
                                          update_stats=True)
            losses.append(_bce_loss(probs, yb))
            grads = _backward_batch(model, cache, yb)
            _adam_update(model, grads, cfg.learning_rate)
        entry = {"epoch": epoch, "train_loss": float(np.mean(losses))}
        if epoch % cfg.validate_every == 0 or epoch == cfg.epochs:
            entry["train_acc"] = _accuracy(model, dataset)
            if val:
                entry["val_acc"] = _accuracy(model, val)
        history.append(entry)
    return model, history


def _accuracy(model: ModelState, sigs) -> float:
    probs = predict_batch(model, list(sigs))
    correct = sum(
        (p > 0.5) == (sig.label == "fake") for p, sig in zip(probs, sigs)
    )
    return correct / len(sigs)


def _to_dtype(model: ModelState, dtype) -> ModelState:
    return ModelState(
        model.omega, model.seed,
        {k: v.astype(dtype) for k, v in model.params.items()},
        {k: v.astype(dtype) for k, v in model.stats.items()},
        {k: v.astype(dtype) for k, v in model.adam_m.items()},
        {k: v.astype(dtype) for k, v in model.adam_v.items()},
        model.step, model.cfg, np.random.default_rng(model.seed),
    )


def gradient_check(model: ModelState, sig: Signature, n_samples: int = 200,
                   h: float = 1e-3, seed: int = 0, corrupt: bool = False) -> float:
    """Max relative error of analytic gradients vs central finite
    differences, on a batch of one in batch-stat mode with dropout off.
    Runs in float64. `corrupt` injects a fault (negative-control hook)."""
    m = _to_dtype(model, np.float64)
    x = _flatten(sig, np.float64)[None, :]
    y = _targets([sig], np.float64)

    probs, cache = _forward_batch(m, x, train=True, dropout=False, update_stats=False)
    grads = _backward_batch(m, cache, y)
    if corrupt:
        grads["w3"] = grads["w3"] + 1.0

    rng = np.random.default_rng(seed)
    entries = []
    names = list(_PARAM_NAMES)
    per = max(1, n_samples // len(names) + 1)
    for name in names:
        flat = m.params[name].reshape(-1)
        picks = rng.choice(flat.size, size=min(per, flat.size), replace=False)
        entries.extend((name, int(i)) for i in picks)
    entries = entries[:max(n_samples, len(names))]

    max_err = 0.0
    for name, i in entries:
        flat = m.params[name].reshape(-1)
        orig = flat[i]
        flat[i] = orig + h
        p_plus, _ = _forward_batch(m, x, train=True, dropout=False, update_stats=False)
        flat[i] = orig - h
        p_minus, _ = _forward_batch(m, x, train=True, dropout=False, update_stats=False)
        flat[i] = orig
        fd = (_bce_loss(p_plus, y) - _bce_loss(p_minus, y)) / (2.0 * h)
        an = float(grads[name].reshape(-1)[i])
        scale = max(abs(an), abs(fd))
        if scale > 1e-8:
            max_err = max(max_err, abs(an - fd) / scale)
    return max_err


_MAGIC = b"GZMD"
_VERSION = 1


def save_model(model: ModelState, path) -> None:
    """Versioned binary container; round trip is bitwise."""
    entries = (
        [("param:" + n, model.params[n]) for n in _PARAM_NAMES]
        + [("stat:" + n, model.stats[n]) for n in _STAT_NAMES]
        + [("adam_m:" + n, model.adam_m[n]) for n in _PARAM_NAMES]
        + [("adam_v:" + n, model.adam_v[n]) for n in _PARAM_NAMES]
    )
    header = {
        "omega": model.omega,
        "seed": model.seed,
        "step": model.step,
        "cfg": asdict(model.cfg),
        "entries": [{"name": n, "shape": list(a.shape)} for n, a in entries],
    }
    blob = json.dumps(header).encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(_MAGIC)
        fh.write(struct.pack("<HI", _VERSION, len(blob)))
        fh.write(blob)
        for _, arr in entries:
            fh.write(np.ascontiguousarray(arr, dtype="<f4").tobytes())


def load_model(path) -> ModelState:
    with open(path, "rb") as fh:
        data = fh.read()
    if data[:4] != _MAGIC:
        raise BadMagic(f"{path}: bad magic {data[:4]!r}")
    version, blob_len = struct.unpack_from("<HI", data, 4)
    if version != _VERSION:
        raise VersionMismatch(f"{path}: version {version}, expected {_VERSION}")
    off = 10
    try:
        header = json.loads(data[off:off + blob_len].decode("utf-8"))
    except (json.JSONDecodeError, UnicodeDecodeError) as exc:
        raise OSError(f"{path}: corrupt header: {exc}") from exc
    off += blob_len
    arrays = {}
    for entry in header["entries"]:
        size = int(np.prod(entry["shape"])) if entry["shape"] else 1
        raw = data[off:off + size * 4]
        if len(raw) < size * 4:
            raise OSError(f"{path}: truncated at entry {entry['name']}")
        arrays[entry["name"]] = np.frombuffer(raw, dtype="<f4").reshape(entry["shape"]).copy()
        off += size * 4
    cfg = TrainConfig(**header["cfg"])
    model = ModelState(
        header["omega"], header["seed"],
        {n: arrays["param:" + n] for n in _PARAM_NAMES},
        {n: arrays["stat:" + n] for n in _STAT_NAMES},
        {n: arrays["adam_m:" + n] for n in _PARAM_NAMES},
        {n: arrays["adam_v:" + n] for n in _PARAM_NAMES},
        header["step"], cfg, np.random.default_rng(header["seed"]),
    )
    return model
