"""Sigmoid-gated fusion of text, image and discrepancy features plus the four-logit head."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ShapeError
from .ops import Linear, relu, sigmoid

# logits_all column order
LOGIT_ORDER = ("text", "image", "discrepancy", "fused")


def gate(W, F):
    """Elementwise ``sigmoid(W @ F)``; no bias. ``F`` may be a vector or a row batch."""
    W = np.asarray(W, dtype=np.float64)
    F = np.asarray(F, dtype=np.float64)
    if W.ndim != 2 or W.shape[1] != F.shape[-1]:
        raise ShapeError(f"gate matrix {W.shape} incompatible with features {F.shape}")
    return sigmoid(F @ W.T)


@dataclass
class FusionParams:
    proj_T: Linear
    proj_I: Linear
    proj_D: Linear
    W_T: np.ndarray
    W_I: np.ndarray
    W_D: np.ndarray
    classifier_T: Linear
    classifier_I: Linear
    classifier_D: Linear
    classifier_fused: Linear
    head_hidden: Linear
    head_out: Linear

    @classmethod
    def init(cls, rng, d_text, d_image, d_disc, d_fused=128, head_hidden=16):
        def square():
            b = 1.0 / np.sqrt(d_fused)
            return rng.uniform(-b, b, size=(d_fused, d_fused))

        return cls(
            proj_T=Linear.init(rng, d_text, d_fused),
            proj_I=Linear.init(rng, d_image, d_fused),
            proj_D=Linear.init(rng, d_disc, d_fused),
            W_T=square(),
            W_I=square(),
            W_D=square(),
            classifier_T=Linear.init(rng, d_fused, 1),
            classifier_I=Linear.init(rng, d_fused, 1),
            classifier_D=Linear.init(rng, d_fused, 1),
            classifier_fused=Linear.init(rng, d_fused, 1),
            head_hidden=Linear.init(rng, len(LOGIT_ORDER), head_hidden),
            head_out=Linear.init(rng, head_hidden, 1),
        )

    @property
    def d_fused(self):
        return self.W_T.shape[0]


def fuse(F_T, F_I, F_D, params: FusionParams):
    shapes = {np.shape(F_T), np.shape(F_I), np.shape(F_D)}
    if len(shapes) != 1 or np.shape(F_T)[-1] != params.d_fused:
        raise ShapeError(f"fusion inputs must all have dimension {params.d_fused}, got {shapes}")
    return gate(params.W_T, F_T) * F_T + gate(params.W_I, F_I) * F_I + gate(params.W_D, F_D) * F_D


def _head_columns(use_discrepancy):
    return [0, 1, 2, 3] if use_discrepancy else [0, 1, 3]


def logits_all(F_T, F_I, F_D, F_fused, params: FusionParams, use_discrepancy=True):
    cols = [
        params.classifier_T(F_T),
        params.classifier_I(F_I),
        params.classifier_D(F_D),
        params.classifier_fused(F_fused),
    ]
    return np.concatenate([cols[i] for i in _head_columns(use_discrepancy)], axis=-1)


def predict(F_T, F_I, F_D, F_fused, params: FusionParams, use_discrepancy=True):
    """``P_final = sigmoid(head(logits_all))``.

    Without the discrepancy path the D logit is dropped and the head sees 3 inputs.
    """
    squeeze = np.ndim(F_T) == 1
    F_T, F_I, F_D, F_fused = (np.atleast_2d(x) for x in (F_T, F_I, F_D, F_fused))
    logits = logits_all(F_T, F_I, F_D, F_fused, params, use_discrepancy)
    W1 = params.head_hidden.weight[:, _head_columns(use_discrepancy)]
    hidden = relu(logits @ W1.T + params.head_hidden.bias)
    p = sigmoid(params.head_out(hidden))[:, 0]
    return float(p[0]) if squeeze else p


class FusionHead:
    """Batched forward/backward from shared-space features to ``P_final``.

    ``forward`` returns the output logit (pre-sigmoid) and a cache;
    ``backward`` turns d(loss)/d(logit) into parameter gradients and
    gradients for the three input feature batches.
    """

    def __init__(self, params: FusionParams, use_discrepancy=True):
        self.p = params
        self.use_discrepancy = use_discrepancy

    def forward(self, z_t, z_v, f_d):
        p = self.p
        F_T = p.proj_T(z_t)
        F_I = p.proj_I(z_v)
        F_D = p.proj_D(f_d) if self.use_discrepancy else np.zeros_like(F_T)
        g_T, g_I, g_D = gate(p.W_T, F_T), gate(p.W_I, F_I), gate(p.W_D, F_D)
        F_fused = g_T * F_T + g_I * F_I + g_D * F_D
        cols = _head_columns(self.use_discrepancy)
        logits = logits_all(F_T, F_I, F_D, F_fused, p, self.use_discrepancy)
        W1 = p.head_hidden.weight[:, cols]
        a = logits @ W1.T + p.head_hidden.bias
        h = relu(a)
        out = p.head_out(h)[:, 0]
        cache = (z_t, z_v, f_d, F_T, F_I, F_D, g_T, g_I, g_D, F_fused, logits, a, h)
        return out, cache

    def backward(self, dout, cache):
        p = self.p
        z_t, z_v, f_d, F_T, F_I, F_D, g_T, g_I, g_D, F_fused, logits, a, h = cache
        cols = _head_columns(self.use_discrepancy)
        g = {}

        dW, db, dh = p.head_out.backward(h, dout[:, None])
        g["head_out.weight"], g["head_out.bias"] = dW, db
        da = dh * (a > 0)
        W1 = p.head_hidden.weight[:, cols]
        dW1 = np.zeros_like(p.head_hidden.weight)
        dW1[:, cols] = da.T @ logits
        g["head_hidden.weight"], g["head_hidden.bias"] = dW1, da.sum(axis=0)
        dlogits = da @ W1
        dl = dict(zip(cols, dlogits.T))

        def classifier(name, lin, x, col):
            if col not in dl:
                g[f"{name}.weight"] = np.zeros_like(lin.weight)
                g[f"{name}.bias"] = np.zeros_like(lin.bias)
                return np.zeros_like(x)
            dW, db, dx = lin.backward(x, dl[col][:, None])
            g[f"{name}.weight"], g[f"{name}.bias"] = dW, db
            return dx

        dF_T = classifier("classifier_T", p.classifier_T, F_T, 0)
        dF_I = classifier("classifier_I", p.classifier_I, F_I, 1)
        dF_D = classifier("classifier_D", p.classifier_D, F_D, 2)
        dF_fused = classifier("classifier_fused", p.classifier_fused, F_fused, 3)

        for key, F, gv, W in (("T", F_T, g_T, p.W_T), ("I", F_I, g_I, p.W_I), ("D", F_D, g_D, p.W_D)):
            d_gate = dF_fused * F
            d_pre = d_gate * gv * (1.0 - gv)
            g[f"W_{key}"] = d_pre.T @ F
            dF = dF_fused * gv + d_pre @ W
            if key == "T":
                dF_T = dF_T + dF
            elif key == "I":
                dF_I = dF_I + dF
            else:
                dF_D = dF_D + dF

        g["proj_T.weight"], g["proj_T.bias"], dz_t = p.proj_T.backward(z_t, dF_T)
        g["proj_I.weight"], g["proj_I.bias"], dz_v = p.proj_I.backward(z_v, dF_I)
        if self.use_discrepancy:
            g["proj_D.weight"], g["proj_D.bias"], df_d = p.proj_D.backward(f_d, dF_D)
        else:
            g["proj_D.weight"] = np.zeros_like(p.proj_D.weight)
            g["proj_D.bias"] = np.zeros_like(p.proj_D.bias)
            g["W_D"] = np.zeros_like(p.W_D)
            df_d = np.zeros_like(f_d)
        return g, dz_t, dz_v, df_d
