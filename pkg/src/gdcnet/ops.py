"""Numerical primitives with hand-written backward passes.

Every ``*_backward`` takes the upstream gradient and returns gradients for
the forward inputs. Arrays are float64 throughout.
"""

from __future__ import annotations

import numpy as np


def sigmoid(x):
    x = np.asarray(x, dtype=np.float64)
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


def relu(x):
    return np.maximum(x, 0.0)


def safe_norm(x, axis=-1):
    """Row norms plus a mask of rows with nonzero norm.

    Rows are rescaled by their largest magnitude first so tiny or huge
    entries do not underflow/overflow when squared.
    """
    scale = np.max(np.abs(x), axis=axis, keepdims=True)
    safe = np.where(scale > 0, scale, 1.0)
    n = np.linalg.norm(x / safe, axis=axis) * np.squeeze(safe, axis=axis)
    return n, n > 0


def unit_rows(x):
    n, ok = safe_norm(x)
    u = np.zeros_like(x)
    scale = np.max(np.abs(x[ok]), axis=1, keepdims=True)
    xs = x[ok] / scale
    u[ok] = xs / np.linalg.norm(xs, axis=1, keepdims=True)
    return u, n, ok


def _unit_backward(du, u, n, ok):
    dx = np.zeros_like(du)
    proj = np.sum(u * du, axis=1, keepdims=True)
    dx[ok] = (du[ok] - u[ok] * proj[ok]) / n[ok, None]
    return dx


def cosine(a, b):
    """Cosine of two vectors; 0 when either has zero norm."""
    u, _, ok = unit_rows(np.stack([np.asarray(a, dtype=np.float64), np.asarray(b, dtype=np.float64)]))
    if not ok.all():
        return 0.0
    return float(np.clip(u[0] @ u[1], -1.0, 1.0))


def paired_cosine(a, b):
    """Row-wise cosine ``cos(a[i], b[i])`` with the zero-norm guard.

    Returns the cosines and a cache for :func:`paired_cosine_backward`.
    """
    ua, na, oka = unit_rows(a)
    ub, nb, okb = unit_rows(b)
    c = np.clip(np.sum(ua * ub, axis=1), -1.0, 1.0)
    return c, (ua, na, oka, ub, nb, okb)


def paired_cosine_backward(dc, cache):
    ua, na, oka, ub, nb, okb = cache
    dc = dc[:, None]
    da = _unit_backward(dc * ub, ua, na, oka)
    db = _unit_backward(dc * ua, ub, nb, okb)
    return da, db


def cosine_matrix(a, b):
    """All-pairs cosine ``S[i, j] = cos(a[i], b[j])`` with the zero-norm guard."""
    ua, na, oka = unit_rows(a)
    ub, nb, okb = unit_rows(b)
    s = np.clip(ua @ ub.T, -1.0, 1.0)
    return s, (ua, na, oka, ub, nb, okb)


def cosine_matrix_backward(ds, cache):
    ua, na, oka, ub, nb, okb = cache
    da = _unit_backward(ds @ ub, ua, na, oka)
    db = _unit_backward(ds.T @ ua, ub, nb, okb)
    return da, db


class Linear:
    """Affine map ``y = x @ W.T + b`` on row batches. ``W`` is (d_out, d_in)."""

    def __init__(self, weight, bias=None):
        self.weight = np.asarray(weight, dtype=np.float64)
        if bias is None:
            bias = np.zeros(self.weight.shape[0])
        self.bias = np.asarray(bias, dtype=np.float64)

    @classmethod
    def init(cls, rng, d_in, d_out, **kw):
        # fan-in uniform, zero bias
        bound = 1.0 / np.sqrt(d_in)
        return cls(rng.uniform(-bound, bound, size=(d_out, d_in)), np.zeros(d_out), **kw)

    @property
    def d_in(self):
        return self.weight.shape[1]

    @property
    def d_out(self):
        return self.weight.shape[0]

    def __call__(self, x):
        return x @ self.weight.T + self.bias

    def backward(self, x, dy):
        """Return ``(dW, db, dx)``."""
        return dy.T @ x, dy.sum(axis=0), dy @ self.weight
