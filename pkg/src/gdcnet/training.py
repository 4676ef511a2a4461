"""Joint BCE + contrastive objective, Adam with two learning-rate groups, and checkpoints."""

from __future__ import annotations

import base64
import json
import logging
import math
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

import numpy as np

from .alignment import contrastive_loss, contrastive_loss_grad
from .data import DatasetManifest, make_batches
from .errors import ConfigError, NumericError, ShapeError, VersionError
from .model import GDCNet, ModelDims, check_flags
from .ops import cosine_matrix, cosine_matrix_backward, sigmoid

log = logging.getLogger(__name__)

BCE_EPS = 1e-7
CHECKPOINT_SCHEMA_VERSION = 1


@dataclass
class TrainConfig:
    alpha: float = 0.1
    margin: float = 0.2
    batch_size: int = 32
    epochs: int = 10
    lr_task: float = 5e-4
    lr_backbone: float = 1e-6
    weight_decay: float = 0.05
    grad_clip_norm: float = 5.0
    seed: int = 0
    ablation: frozenset = field(default_factory=frozenset)

    def __post_init__(self):
        self.ablation = check_flags(self.ablation)
        self.validate()

    def validate(self):
        if self.alpha < 0:
            raise ConfigError(f"alpha must be >= 0, got {self.alpha}")
        if self.margin <= 0:
            raise ConfigError(f"margin must be > 0, got {self.margin}")
        if self.batch_size < 2:
            raise ConfigError(
                f"batch_size={self.batch_size}: the contrastive loss needs in-batch negatives (batch_size >= 2)"
            )
        if self.epochs < 0:
            raise ConfigError("epochs must be >= 0")
        if self.grad_clip_norm <= 0:
            raise ConfigError("grad_clip_norm must be > 0")
        if self.lr_task < 0 or self.lr_backbone < 0 or self.weight_decay < 0:
            raise ConfigError("learning rates and weight decay must be >= 0")

    @property
    def symmetric_contrastive(self) -> bool:
        return "symmetric_contrastive" in self.ablation

    def to_dict(self) -> dict:
        d = asdict(self)
        d["ablation"] = sorted(self.ablation)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "TrainConfig":
        names = {f.name for f in fields(cls)}
        unknown = set(d) - names
        if unknown:
            raise ConfigError(f"unknown training key(s): {', '.join(sorted(unknown))}")
        return cls(**d)


# losses ---------------------------------------------------------------


def bce_loss(P, y) -> float:
    P = np.atleast_1d(np.asarray(P, dtype=np.float64))
    y = np.atleast_1d(np.asarray(y, dtype=np.float64))
    if P.shape != y.shape:
        raise ShapeError(f"{P.shape[0]} predictions vs {y.shape[0]} labels")
    Pc = np.clip(P, BCE_EPS, 1.0 - BCE_EPS)
    return float(-np.mean(y * np.log(Pc) + (1.0 - y) * np.log(1.0 - Pc)))


def bce_grad_logits(logits, y) -> np.ndarray:
    """d(bce_loss(sigmoid(logits), y)) / d(logits); zero where the probability is clamped."""
    P = sigmoid(logits)
    inside = (P > BCE_EPS) & (P < 1.0 - BCE_EPS)
    return np.where(inside, (P - y) / len(y), 0.0)


def total_loss(l_bce: float, l_cont: float, alpha: float) -> float:
    if alpha < 0:
        raise ConfigError("alpha must be >= 0")
    return l_bce + alpha * l_cont


def loss_and_grads(model: GDCNet, batch, config: TrainConfig, need_grads: bool = True):
    """Evaluate the joint objective on a batch. Returns ``(parts, grads)``."""
    out, feats, cache = model.forward(batch)
    P = sigmoid(out)
    l_bce = bce_loss(P, batch.labels)
    S, s_cache = cosine_matrix(feats["z_image"], feats["z_text"])
    sym = config.symmetric_contrastive
    l_cont = contrastive_loss(S, config.margin, sym)
    parts = {"bce": l_bce, "contrastive": l_cont, "total": total_loss(l_bce, l_cont, config.alpha), "P": P}
    if not need_grads:
        return parts, None
    dout = bce_grad_logits(out, batch.labels)
    dz_v = dz_t = None
    if config.alpha != 0:
        dS = config.alpha * contrastive_loss_grad(S, config.margin, sym)
        dz_v, dz_t = cosine_matrix_backward(dS, s_cache)
    grads = model.backward(dout, cache, dz_t_extra=dz_t, dz_v_extra=dz_v)
    return parts, grads


def activation_pattern(model: GDCNet, batch, config: TrainConfig) -> np.ndarray:
    """Boolean signature of every rectifier and hinge in the objective.

    Two points with equal signatures lie on the same smooth piece.
    """
    out, feats, cache = model.forward(batch)
    a_mlp = cache[6][1]
    a_head = cache[8][11]
    S, _ = cosine_matrix(feats["z_image"], feats["z_text"])
    h = config.margin + S - np.diag(S)[:, None]
    P = sigmoid(out)
    return np.concatenate([
        (a_mlp > 0).ravel(),
        (a_head > 0).ravel(),
        (h > 0).ravel(),
        ((P > BCE_EPS) & (P < 1 - BCE_EPS)).ravel(),
    ])


# optimisation ----------------------------------------------------------


def global_norm(grads: dict) -> float:
    return math.sqrt(sum(float(np.sum(g * g)) for g in grads.values()))


def clip_global_norm(grads: dict, max_norm: float) -> tuple[float, float]:
    """Scale gradients in place so their joint L2 norm is at most ``max_norm``.

    Returns (norm before, norm after).
    """
    before = global_norm(grads)
    if before > max_norm:
        scale = max_norm / (before + 1e-6)
        for g in grads.values():
            g *= scale
    return before, global_norm(grads)


class Adam:
    """Adam with L2 weight decay folded into the gradient and per-group learning rates.

    ``groups`` maps group name -> (lr, {param name -> live array}). Empty
    groups are allowed.
    """

    def __init__(self, groups: dict, weight_decay: float = 0.0, betas=(0.9, 0.999), eps: float = 1e-8):
        self.groups = groups
        self.weight_decay = weight_decay
        self.beta1, self.beta2 = betas
        self.eps = eps
        self.t = 0
        self.m = {n: np.zeros_like(p) for _, ps in groups.values() for n, p in ps.items()}
        self.v = {n: np.zeros_like(p) for _, ps in groups.values() for n, p in ps.items()}

    def step(self, grads: dict) -> None:
        self.t += 1
        b1, b2 = self.beta1, self.beta2
        c1 = 1.0 - b1**self.t
        c2 = 1.0 - b2**self.t
        for lr, params in self.groups.values():
            for name, p in params.items():
                g = grads.get(name)
                if g is None:
                    continue
                if self.weight_decay:
                    g = g + self.weight_decay * p
                m, v = self.m[name], self.v[name]
                m *= b1
                m += (1.0 - b1) * g
                v *= b2
                v += (1.0 - b2) * g * g
                p -= lr * (m / c1) / (np.sqrt(v / c2) + self.eps)


def make_optimizer(model: GDCNet, config: TrainConfig) -> Adam:
    return Adam(
        {
            "task": (config.lr_task, model.parameters()),
            "backbone": (config.lr_backbone, model.backbone_parameters()),
        },
        weight_decay=config.weight_decay,
    )


@dataclass
class EpochStats:
    epoch: int
    losses: list = field(default_factory=list)
    bce: list = field(default_factory=list)
    contrastive: list = field(default_factory=list)
    grad_norm_pre: list = field(default_factory=list)
    grad_norm_post: list = field(default_factory=list)
    train_accuracy: float = float("nan")

    @property
    def mean_loss(self) -> float:
        return float(np.mean(self.losses)) if self.losses else float("nan")

    def to_dict(self) -> dict:
        d = asdict(self)
        d["mean_loss"] = self.mean_loss
        return d


def apply_ablation(model: GDCNet, flags) -> GDCNet:
    """Masked view of ``model``: parameters are shared, only the forward path changes."""
    return model.with_flags(flags)


def train_epoch(model: GDCNet, manifest: DatasetManifest, config: TrainConfig, optimizer: Adam | None = None,
                epoch: int = 0):
    """One pass over the train split. Returns ``(model, EpochStats)``.

    Pass the same ``optimizer`` across epochs to keep its moment estimates.
    """
    if optimizer is None:
        optimizer = make_optimizer(model, config)
    batches = make_batches(manifest, "train", config.batch_size, config.seed, epoch)
    stats = EpochStats(epoch)
    correct = 0
    total = 0
    for bi, samples in enumerate(batches):
        batch = model.featurize(samples)
        parts, grads = loss_and_grads(model, batch, config)
        if not math.isfinite(parts["total"]):
            raise NumericError(
                f"non-finite loss {parts['total']} at epoch {epoch} batch {bi} (ids {', '.join(batch.ids[:5])}...)"
            )
        pre, post = clip_global_norm(grads, config.grad_clip_norm)
        optimizer.step(grads)
        stats.losses.append(parts["total"])
        stats.bce.append(parts["bce"])
        stats.contrastive.append(parts["contrastive"])
        stats.grad_norm_pre.append(pre)
        stats.grad_norm_post.append(post)
        correct += int(np.sum((parts["P"] >= 0.5) == (batch.labels == 1)))
        total += len(batch)
    stats.train_accuracy = correct / total
    return model, stats


def fit(model: GDCNet, manifest: DatasetManifest, config: TrainConfig, checkpoint_dir=None, on_epoch=None):
    """Train for ``config.epochs`` epochs, checkpointing each epoch if a directory is given.

    Returns a history list of per-epoch dicts; when a non-empty val split
    exists each entry carries its val metrics.
    """
    from .metrics import evaluate

    model = apply_ablation(model, config.ablation)
    optimizer = make_optimizer(model, config)
    has_val = any(s.split == "val" for s in manifest.samples)
    history = []
    for epoch in range(config.epochs):
        _, stats = train_epoch(model, manifest, config, optimizer, epoch)
        entry = stats.to_dict()
        if has_val:
            rep = evaluate(model, manifest, "val")
            entry["val"] = {k: getattr(rep, k) for k in ("accuracy", "precision", "recall", "f1")}
        history.append(entry)
        log.info("epoch %d loss %.5f train_acc %.4f", epoch, stats.mean_loss, stats.train_accuracy)
        if checkpoint_dir is not None:
            save_checkpoint(Path(checkpoint_dir) / f"epoch_{epoch:03d}.ckpt", model, epoch, config, history)
        if on_epoch is not None:
            on_epoch(epoch, entry)
    return model, history


def best_epoch(history) -> int | None:
    """Epoch with the highest val F1 (earliest on ties), or None without val metrics."""
    scored = [(h["val"]["f1"], -h["epoch"]) for h in history if "val" in h]
    if not scored:
        return None
    return -max(scored)[1]


# checkpoints -------------------------------------------------------------


def _encode_array(a: np.ndarray) -> dict:
    a = np.ascontiguousarray(a, dtype="<f8")
    return {"shape": list(a.shape), "dtype": "float64", "data": base64.b64encode(a.tobytes()).decode("ascii")}


def _decode_array(d: dict) -> np.ndarray:
    raw = base64.b64decode(d["data"])
    return np.frombuffer(raw, dtype="<f8").reshape(d["shape"]).astype(np.float64)


def save_checkpoint(path, model: GDCNet, epoch: int, config: TrainConfig, history=()) -> None:
    """Write a JSON checkpoint. Parameters are stored as base64 little-endian float64, row-major."""
    doc = {
        "schema_version": CHECKPOINT_SCHEMA_VERSION,
        "epoch": epoch,
        "config": config.to_dict(),
        "model": model.config_dict(),
        "history": list(history),
        "params": {name: _encode_array(arr) for name, arr in model.parameters().items()},
    }
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh, sort_keys=True, indent=1)
        fh.write("\n")


def load_checkpoint(path, store=None, lexicon=None):
    """Return ``(model, meta)`` where meta holds epoch, config and history."""
    with open(path, encoding="utf-8") as fh:
        doc = json.load(fh)
    version = doc.get("schema_version")
    if version != CHECKPOINT_SCHEMA_VERSION:
        raise VersionError(f"checkpoint schema_version {version}, this build reads {CHECKPOINT_SCHEMA_VERSION}")
    dims = ModelDims(**doc["model"]["dims"])
    model = GDCNet(dims, store=store, lexicon=lexicon, flags=doc["model"]["flags"])
    model.load_parameters({k: _decode_array(v) for k, v in doc["params"].items()})
    meta = {
        "epoch": doc["epoch"],
        "config": TrainConfig.from_dict({**doc["config"], "ablation": frozenset(doc["config"]["ablation"])}),
        "history": doc["history"],
    }
    return model, meta
