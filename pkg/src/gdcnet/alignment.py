"""In-batch image/text similarity and the margin hinge contrastive loss."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, ShapeError
from .ops import cosine_matrix

DEFAULT_MARGIN = 0.2


@dataclass(frozen=True, eq=False)
class SimilarityMatrix:
    scores: np.ndarray

    @property
    def batch_size(self) -> int:
        return self.scores.shape[0]


def _as_rows(vectors):
    if isinstance(vectors, np.ndarray):
        return np.atleast_2d(vectors).astype(np.float64)
    return np.stack([getattr(v, "values", v) for v in vectors]).astype(np.float64)


def similarity_matrix(z_v, z_t) -> SimilarityMatrix:
    """``scores[i, j]`` is the cosine between image ``i`` and text ``j`` (0 for zero vectors)."""
    a, b = _as_rows(z_v), _as_rows(z_t)
    if a.shape != b.shape:
        raise ShapeError(f"image batch {a.shape} and text batch {b.shape} differ")
    if a.shape[0] < 2:
        raise ShapeError("similarity matrix needs a batch of at least 2")
    s, _ = cosine_matrix(a, b)
    return SimilarityMatrix(s)


def _hinge_terms(s, margin):
    # h[i, j] = m + s_ij - s_ii, diagonal excluded
    h = margin + s - np.diag(s)[:, None]
    np.fill_diagonal(h, -np.inf)
    return h


def contrastive_loss(S, margin: float = DEFAULT_MARGIN, symmetric: bool = False) -> float:
    """Image-anchored hinge loss ``(1/B) sum_i sum_{j != i} max(0, m + s_ij - s_ii)``.

    With ``symmetric=True`` a text-anchored term of the same form is added.
    """
    if margin <= 0:
        raise ConfigError(f"contrastive margin must be > 0, got {margin}")
    s = S.scores if isinstance(S, SimilarityMatrix) else np.asarray(S, dtype=np.float64)
    B = s.shape[0]
    loss = np.maximum(_hinge_terms(s, margin), 0.0).sum() / B
    if symmetric:
        loss += np.maximum(_hinge_terms(s.T, margin), 0.0).sum() / B
    return float(loss)


def contrastive_loss_grad(S, margin: float = DEFAULT_MARGIN, symmetric: bool = False) -> np.ndarray:
    """Subgradient of :func:`contrastive_loss` w.r.t. the score matrix (0 at the hinge point)."""
    s = S.scores if isinstance(S, SimilarityMatrix) else np.asarray(S, dtype=np.float64)
    B = s.shape[0]
    active = (_hinge_terms(s, margin) > 0).astype(np.float64)
    ds = active / B
    ds[np.diag_indices(B)] = -active.sum(axis=1) / B
    if symmetric:
        active_t = (_hinge_terms(s.T, margin) > 0).astype(np.float64)
        ds_t = active_t / B
        ds_t[np.diag_indices(B)] = -active_t.sum(axis=1) / B
        ds = ds + ds_t.T
    return ds
