"""TabNet classifier in numpy with hand-derived gradients.

Architecture: input batch norm, a feature transformer (two shared GLU blocks
plus two step-specific ones) run once as an initial splitter and once per
decision step, an attentive transformer per step (affine map, batch norm,
prior scaling, sparsemax), and a linear head over the summed rectified
decision outputs.
"""
from __future__ import annotations

import json
import logging
import math
import warnings
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path

import numpy as np

from .errors import NumericError, SchemaError, TrainingError

logger = logging.getLogger(__name__)

BN_EPS = 1e-5
LOG_EPS = 1e-15
SQRT_HALF = math.sqrt(0.5)


@dataclass(frozen=True)
class TabNetConfig:
    n_steps: int = 3
    n_d: int = 8
    n_a: int = 8
    gamma: float = 1.3
    lambda_sparse: float = 1e-3
    batch_size: int = 128
    learning_rate: float = 0.02
    lr_decay: float = 0.95
    epochs: int = 200
    patience: int = 30
    val_fraction: float = 0.1
    bn_momentum: float = 0.9
    seed: int = 0

    def __post_init__(self):
        if self.n_steps < 1 or self.n_d < 1 or self.n_a < 1:
            raise ValueError("n_steps, n_d and n_a must be at least 1")
        if self.gamma < 1.0:
            raise ValueError("relaxation gamma must be >= 1")
        if self.lambda_sparse < 0:
            raise ValueError("sparsity weight must be non-negative")
        if self.batch_size < 2 or self.epochs < 1:
            raise ValueError("batch_size must be >= 2 and epochs >= 1")
        if not 0.0 <= self.val_fraction < 1.0:
            raise ValueError("val_fraction must be in [0, 1)")

    @property
    def width(self) -> int:
        return self.n_d + self.n_a


# --------------------------------------------------------------------------
# sparsemax


def sparsemax(z) -> np.ndarray:
    """Euclidean projection of each row of ``z`` onto the probability simplex."""
    z = np.asarray(z, dtype=np.float64)
    if not np.all(np.isfinite(z)):
        raise NumericError("sparsemax input has non-finite entries")
    squeeze = z.ndim == 1
    z2 = np.atleast_2d(z)
    d = z2.shape[1]
    srt = -np.sort(-z2, axis=1)
    cumsum = np.cumsum(srt, axis=1)
    k = np.arange(1, d + 1)
    support = 1.0 + k * srt > cumsum
    k_max = d - np.argmax(support[:, ::-1], axis=1)
    tau = (cumsum[np.arange(z2.shape[0]), k_max - 1] - 1.0) / k_max
    p = np.maximum(z2 - tau[:, None], 0.0)
    return p[0] if squeeze else p


def sparsemax_backward(p: np.ndarray, dp: np.ndarray) -> np.ndarray:
    support = p > 0
    size = support.sum(axis=1, keepdims=True)
    mean = (dp * support).sum(axis=1, keepdims=True) / size
    return support * (dp - mean)


# --------------------------------------------------------------------------
# parameters


@dataclass
class TabNetParams:
    """Learnable tensors, batch-norm running statistics and Adam state."""

    weights: dict
    running: dict
    n_features: int
    classes: tuple
    adam_m: dict = field(default_factory=dict)
    adam_v: dict = field(default_factory=dict)
    adam_t: int = 0

    def copy(self) -> "TabNetParams":
        return TabNetParams(
            {k: v.copy() for k, v in self.weights.items()},
            {k: v.copy() for k, v in self.running.items()},
            self.n_features,
            tuple(self.classes),
            {k: v.copy() for k, v in self.adam_m.items()},
            {k: v.copy() for k, v in self.adam_v.items()},
            self.adam_t,
        )

    def n_parameters(self) -> int:
        return int(sum(v.size for v in self.weights.values()))

    def save(self, path, cfg: TabNetConfig | None = None) -> None:
        """Text artifact: a JSON manifest line, then one line of values per tensor."""
        groups = {"weights": self.weights, "running": self.running,
                  "adam_m": self.adam_m, "adam_v": self.adam_v}
        manifest = {
            "n_features": self.n_features,
            "classes": list(self.classes),
            "adam_t": self.adam_t,
            "config": asdict(cfg) if cfg else None,
            "tensors": [[g, k, list(v.shape)] for g, d in groups.items() for k, v in sorted(d.items())],
        }
        with Path(path).open("w", encoding="utf-8") as fh:
            fh.write(json.dumps(manifest) + "\n")
            for g, d in groups.items():
                for k, v in sorted(d.items()):
                    fh.write(" ".join(repr(float(x)) for x in v.ravel()) + "\n")

    @classmethod
    def load(cls, path):
        """Returns ``(params, config_or_None)``."""
        with Path(path).open(encoding="utf-8") as fh:
            manifest = json.loads(fh.readline())
            groups = {"weights": {}, "running": {}, "adam_m": {}, "adam_v": {}}
            for g, k, shape in manifest["tensors"]:
                line = fh.readline().split()
                groups[g][k] = np.array([float(x) for x in line]).reshape(shape)
        cfg = TabNetConfig(**manifest["config"]) if manifest["config"] else None
        params = cls(groups["weights"], groups["running"], manifest["n_features"],
                     tuple(manifest["classes"]), groups["adam_m"], groups["adam_v"],
                     manifest["adam_t"])
        return params, cfg


def _glorot(rng, fan_in, fan_out):
    limit = math.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-limit, limit, size=(fan_in, fan_out))


def _block_names(cfg: TabNetConfig):
    """(weight name, batch-norm prefix) per GLU block of each transformer, step 0 = splitter.

    The two shared blocks share their affine weights across steps but every
    step keeps its own batch norm, since each step sees differently masked inputs.
    """
    return {s: [(f"shared{j}.w", f"step{s}.shared{j}.bn") for j in range(2)]
            + [(f"step{s}.glu{j}.w", f"step{s}.glu{j}.bn") for j in range(2)]
            for s in range(cfg.n_steps + 1)}


def init_params(n_features: int, classes, cfg: TabNetConfig, seed: int | None = None) -> TabNetParams:
    rng = np.random.default_rng(cfg.seed if seed is None else seed)
    h = cfg.width
    w, run = {}, {}

    def bn(prefix, size):
        w[prefix + ".gamma"] = np.ones(size)
        w[prefix + ".beta"] = np.zeros(size)
        run[prefix + ".mean"] = np.zeros(size)
        run[prefix + ".var"] = np.ones(size)

    bn("bn0", n_features)
    w["shared0.w"] = _glorot(rng, n_features, 2 * h)
    w["shared1.w"] = _glorot(rng, h, 2 * h)
    for s in range(cfg.n_steps + 1):
        for j in range(2):
            bn(f"step{s}.shared{j}.bn", 2 * h)
        for j in range(2):
            w[f"step{s}.glu{j}.w"] = _glorot(rng, h, 2 * h)
            bn(f"step{s}.glu{j}.bn", 2 * h)
    for s in range(1, cfg.n_steps + 1):
        w[f"att{s}.w"] = _glorot(rng, cfg.n_a, n_features)
        bn(f"att{s}.bn", n_features)
    w["head.w"] = _glorot(rng, cfg.n_d, len(classes))
    w["head.b"] = np.zeros(len(classes))
    return TabNetParams(w, run, n_features, tuple(int(c) for c in classes))


# --------------------------------------------------------------------------
# layers: forward returns (out, cache); backward accumulates into grads


def _bn_forward(x, w, running, prefix, train, momentum, new_running):
    gamma, beta = w[prefix + ".gamma"], w[prefix + ".beta"]
    if train:
        mu = x.mean(axis=0)
        var = x.var(axis=0)
        if new_running is not None:
            b = x.shape[0]
            unbiased = var * b / (b - 1) if b > 1 else var
            new_running[prefix + ".mean"] = momentum * running[prefix + ".mean"] + (1 - momentum) * mu
            new_running[prefix + ".var"] = momentum * running[prefix + ".var"] + (1 - momentum) * unbiased
    else:
        mu, var = running[prefix + ".mean"], running[prefix + ".var"]
    inv_std = 1.0 / np.sqrt(var + BN_EPS)
    xhat = (x - mu) * inv_std
    return gamma * xhat + beta, (prefix, xhat, inv_std, train)


def _bn_backward(dy, cache, w, grads):
    prefix, xhat, inv_std, train = cache
    grads[prefix + ".gamma"] += (dy * xhat).sum(axis=0)
    grads[prefix + ".beta"] += dy.sum(axis=0)
    dxhat = dy * w[prefix + ".gamma"]
    if not train:
        return dxhat * inv_std
    b = dy.shape[0]
    return inv_std / b * (b * dxhat - dxhat.sum(axis=0) - xhat * (dxhat * xhat).sum(axis=0))


def _sigmoid(x):
    return 0.5 * (1.0 + np.tanh(0.5 * x))


def _glu_forward(x, wname, bnname, ctx):
    w = ctx["w"]
    a = x @ w[wname]
    a, bn_cache = _bn_forward(a, w, ctx["running"], bnname, ctx["train"], ctx["momentum"], ctx["new_running"])
    h = a.shape[1] // 2
    gate = _sigmoid(a[:, h:])
    return a[:, :h] * gate, (x, wname, bn_cache, a[:, :h], gate)


def _glu_backward(dout, cache, w, grads):
    x, wname, bn_cache, lin, gate = cache
    da = np.concatenate([dout * gate, dout * lin * gate * (1.0 - gate)], axis=1)
    da = _bn_backward(da, bn_cache, w, grads)
    grads[wname] += x.T @ da
    return da @ w[wname].T


def _transformer_forward(x, blocks, ctx):
    caches = []
    h, c = _glu_forward(x, *blocks[0], ctx)
    caches.append(c)
    for names in blocks[1:]:
        g, c = _glu_forward(h, *names, ctx)
        caches.append(c)
        h = (h + g) * SQRT_HALF
    return h, caches


def _transformer_backward(dh, caches, w, grads):
    for c in reversed(caches[1:]):
        dh = dh * SQRT_HALF
        dh = dh + _glu_backward(dh, c, w, grads)
    return _glu_backward(dh, caches[0], w, grads)


# --------------------------------------------------------------------------
# forward / loss


@dataclass
class ForwardTrace:
    logits: np.ndarray  # (n, n_classes)
    masks: list  # n_steps arrays of (n, n_features)
    decisions: list  # n_steps rectified decision outputs (n, n_d)
    sparsity: float
    priors: list = field(default_factory=list)  # prior scale entering each step, plus the final one
    new_running: dict = field(default_factory=dict, repr=False)
    cache: dict = field(default_factory=dict, repr=False)


def _check_finite(arr, what, step):
    if not np.all(np.isfinite(arr)):
        raise NumericError(f"non-finite {what} at step {step}")


def tabnet_forward(x, p: TabNetParams, cfg: TabNetConfig, mode: str = "eval") -> ForwardTrace:
    """Run the network. In train mode batch norms use batch statistics and the
    updated running statistics are returned in ``trace.new_running`` (params are
    never mutated)."""
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 2 or x.shape[1] != p.n_features:
        raise SchemaError(f"expected (n, {p.n_features}) input, got {x.shape}")
    if mode not in ("train", "eval"):
        raise ValueError("mode must be 'train' or 'eval'")
    train = mode == "train"
    w = p.weights
    new_running = dict(p.running) if train else None
    ctx = {"w": w, "running": p.running, "train": train, "momentum": cfg.bn_momentum,
           "new_running": new_running}
    blocks = _block_names(cfg)

    xb, bn0_cache = _bn_forward(x, w, p.running, "bn0", train, cfg.bn_momentum, new_running)
    z, ft_cache = _transformer_forward(xb, blocks[0], ctx)
    _check_finite(z, "splitter activation", 0)
    att = z[:, cfg.n_d:]
    prior = np.ones_like(x)
    steps = []
    masks, decisions, priors = [], [], [prior]
    agg = np.zeros((x.shape[0], cfg.n_d))
    entropy = 0.0
    for s in range(1, cfg.n_steps + 1):
        lin = att @ w[f"att{s}.w"]
        a_bn, att_bn_cache = _bn_forward(lin, w, p.running, f"att{s}.bn", train, cfg.bn_momentum, new_running)
        scaled = a_bn * prior
        m = sparsemax(scaled)
        entropy += np.mean(np.sum(-m * np.log(m + LOG_EPS), axis=1))
        new_prior = prior * (cfg.gamma - m)
        zs, fc = _transformer_forward(m * xb, blocks[s], ctx)
        _check_finite(zs, "feature transformer activation", s)
        dec = np.maximum(zs[:, : cfg.n_d], 0.0)
        agg = agg + dec
        steps.append({"att_in": att, "att_bn_cache": att_bn_cache, "a_bn": a_bn,
                      "prior": prior, "m": m, "ft_cache": fc, "z": zs})
        masks.append(m)
        decisions.append(dec)
        att = zs[:, cfg.n_d:]
        prior = new_prior
        priors.append(prior)

    logits = agg @ w["head.w"] + w["head.b"]
    _check_finite(logits, "logits", cfg.n_steps)
    cache = {"xb": xb, "bn0_cache": bn0_cache, "ft0_cache": ft_cache, "steps": steps, "agg": agg}
    return ForwardTrace(logits, masks, decisions, entropy / cfg.n_steps, priors,
                        new_running or {}, cache)


def _log_softmax(logits):
    shifted = logits - logits.max(axis=1, keepdims=True)
    return shifted - np.log(np.exp(shifted).sum(axis=1, keepdims=True))


def cross_entropy(logits, y_index) -> float:
    logp = _log_softmax(np.asarray(logits, dtype=np.float64))
    return float(-logp[np.arange(logp.shape[0]), y_index].mean())


def tabnet_loss(trace: ForwardTrace, y_index, lambda_sparse: float) -> float:
    """Mean cross-entropy plus ``lambda_sparse`` times the mask entropy penalty."""
    y_index = np.asarray(y_index)
    if y_index.shape != (trace.logits.shape[0],):
        raise SchemaError("labels and logits disagree on row count")
    return cross_entropy(trace.logits, y_index) + lambda_sparse * trace.sparsity


def tabnet_backward(trace: ForwardTrace, y_index, p: TabNetParams, cfg: TabNetConfig) -> dict:
    """Gradients of ``tabnet_loss`` with respect to every learnable tensor."""
    w = p.weights
    grads = {k: np.zeros_like(v) for k, v in w.items()}
    cache = trace.cache
    n = trace.logits.shape[0]

    probs = np.exp(_log_softmax(trace.logits))
    dlogits = probs
    dlogits[np.arange(n), y_index] -= 1.0
    dlogits /= n
    grads["head.w"] += cache["agg"].T @ dlogits
    grads["head.b"] += dlogits.sum(axis=0)
    dagg = dlogits @ w["head.w"].T

    ent_scale = cfg.lambda_sparse / (cfg.n_steps * n)
    dxb = np.zeros_like(cache["xb"])
    datt = np.zeros((n, cfg.n_a))
    dprior = np.zeros_like(cache["xb"])  # gradient w.r.t. the prior produced by the current step
    for s in range(cfg.n_steps, 0, -1):
        st = cache["steps"][s - 1]
        m, prior, zs = st["m"], st["prior"], st["z"]
        dz = np.concatenate([dagg * (zs[:, : cfg.n_d] > 0), datt], axis=1)
        dmasked = _transformer_backward(dz, st["ft_cache"], w, grads)
        dm = dmasked * cache["xb"]
        dxb += dmasked * m
        # new_prior = prior * (gamma - m)
        dm += -dprior * prior
        dprior_prev = dprior * (cfg.gamma - m)
        dm += -ent_scale * (np.log(m + LOG_EPS) + m / (m + LOG_EPS))
        dscaled = sparsemax_backward(m, dm)
        dprior_prev += dscaled * st["a_bn"]
        da_bn = dscaled * prior
        dlin = _bn_backward(da_bn, st["att_bn_cache"], w, grads)
        grads[f"att{s}.w"] += st["att_in"].T @ dlin
        datt = dlin @ w[f"att{s}.w"].T
        dprior = dprior_prev

    dz0 = np.concatenate([np.zeros((n, cfg.n_d)), datt], axis=1)
    dxb += _transformer_backward(dz0, cache["ft0_cache"], w, grads)
    _bn_backward(dxb, cache["bn0_cache"], w, grads)
    return grads


def loss_and_grad(x, y_index, p: TabNetParams, cfg: TabNetConfig, mode: str = "train"):
    trace = tabnet_forward(x, p, cfg, mode)
    loss = tabnet_loss(trace, y_index, cfg.lambda_sparse)
    return loss, tabnet_backward(trace, np.asarray(y_index), p, cfg), trace


# --------------------------------------------------------------------------
# training


def _adam_step(p: TabNetParams, grads: dict, lr: float, b1=0.9, b2=0.999, eps=1e-8):
    p.adam_t += 1
    t = p.adam_t
    for k, g in grads.items():
        m = p.adam_m.setdefault(k, np.zeros_like(g))
        v = p.adam_v.setdefault(k, np.zeros_like(g))
        m *= b1
        m += (1 - b1) * g
        v *= b2
        v += (1 - b2) * g * g
        m_hat = m / (1 - b1 ** t)
        v_hat = v / (1 - b2 ** t)
        p.weights[k] -= lr * m_hat / (np.sqrt(v_hat) + eps)


@dataclass(frozen=True)
class EpochLog:
    epoch: int
    train_loss: float
    val_accuracy: float


def _validation_split(y_index, fraction, rng):
    if fraction <= 0:
        return np.arange(y_index.size), np.array([], dtype=np.int64)
    val = []
    for c in np.unique(y_index):
        members = np.flatnonzero(y_index == c)
        k = int(math.floor(fraction * members.size))
        val.append(members[rng.permutation(members.size)[:k]])
    val = np.sort(np.concatenate(val))
    train = np.setdiff1d(np.arange(y_index.size), val)
    return train, val


def predict_index(p: TabNetParams, cfg: TabNetConfig, x) -> np.ndarray:
    return np.argmax(tabnet_forward(x, p, cfg, "eval").logits, axis=1)


def tabnet_predict(p: TabNetParams, cfg: TabNetConfig, x) -> np.ndarray:
    """Argmax-logit class labels (ties go to the lowest class)."""
    return np.asarray(p.classes)[predict_index(p, cfg, x)]


def tabnet_fit(x, y, cfg: TabNetConfig | None = None):
    """Train with Adam on seeded shuffled mini-batches.

    A stratified ``val_fraction`` slice of the training rows drives early
    stopping; the best-validation parameters are returned with the epoch log.
    """
    cfg = cfg or TabNetConfig()
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y)
    if x.ndim != 2 or y.shape != (x.shape[0],):
        raise SchemaError("x must be (n, d) with one label per row")
    classes = tuple(int(c) for c in np.unique(y))
    y_index = np.searchsorted(classes, y)
    rng = np.random.default_rng(cfg.seed)
    params = init_params(x.shape[1], classes, cfg, seed=cfg.seed)

    fit_idx, val_idx = _validation_split(y_index, cfg.val_fraction, rng)
    if val_idx.size == 0:
        fit_idx, val_idx = np.arange(x.shape[0]), np.arange(x.shape[0])
    x_fit, y_fit = x[fit_idx], y_index[fit_idx]
    x_val, y_val = x[val_idx], y_index[val_idx]
    n_batches = max(1, math.ceil(x_fit.shape[0] / cfg.batch_size))

    best = (-1.0, None, 0)
    log = []
    lr = cfg.learning_rate
    since_best = 0
    for epoch in range(1, cfg.epochs + 1):
        perm = rng.permutation(x_fit.shape[0])
        total = 0.0
        for batch in np.array_split(perm, n_batches):
            loss, grads, trace = loss_and_grad(x_fit[batch], y_fit[batch], params, cfg, "train")
            if not math.isfinite(loss):
                raise TrainingError(f"loss became non-finite in epoch {epoch}", epoch=epoch)
            _adam_step(params, grads, lr)
            params.running.update(trace.new_running)
            total += loss * batch.size
        val_acc = float(np.mean(predict_index(params, cfg, x_val) == y_val))
        log.append(EpochLog(epoch, total / x_fit.shape[0], val_acc))
        if val_acc > best[0]:
            best = (val_acc, params.copy(), epoch)
            since_best = 0
        else:
            since_best += 1
            if since_best >= cfg.patience:
                break
        lr *= cfg.lr_decay
    logger.debug("tabnet: best validation accuracy %.4f at epoch %d", best[0], best[2])
    return best[1], log


def write_training_log(log, path) -> None:
    with Path(path).open("w", encoding="utf-8") as fh:
        fh.write("epoch,train_loss,val_accuracy\n")
        for row in log:
            fh.write(f"{row.epoch},{row.train_loss:.6f},{row.val_accuracy:.6f}\n")


def feature_importance(trace: ForwardTrace) -> np.ndarray:
    """Per-instance mask aggregate weighted by each step's total rectified decision output."""
    agg = np.zeros_like(trace.masks[0])
    for m, dec in zip(trace.masks, trace.decisions):
        agg += dec.sum(axis=1, keepdims=True) * m
    totals = agg.sum(axis=1, keepdims=True)
    flat = totals[:, 0] <= 0
    if flat.any():
        warnings.warn(f"{int(flat.sum())} rows have an all-zero importance aggregate; returning uniform",
                      RuntimeWarning, stacklevel=2)
        agg[flat] = 1.0
        totals[flat] = agg.shape[1]
    return agg / totals


def with_overrides(cfg: TabNetConfig, **overrides) -> TabNetConfig:
    return replace(cfg, **{k: v for k, v in overrides.items() if v is not None})
