"""Central finite-difference gradient checking."""

from __future__ import annotations

import numpy as np


def numerical_grad(f, x: np.ndarray, step: float = 1e-4, coords=None, pattern=None) -> np.ndarray:
    """Central differences of scalar ``f()`` w.r.t. the array ``x``, perturbed in place.

    ``coords`` restricts the flat indices evaluated (others are NaN).
    ``pattern()`` returns the piecewise activation pattern of the current
    point; a coordinate whose two perturbed points disagree straddles a kink
    and is left NaN.
    """
    grad = np.full(x.shape, np.nan)
    flat = x.reshape(-1)
    for i in range(flat.size) if coords is None else coords:
        orig = flat[i]
        flat[i] = orig + step
        fp = f()
        sig_p = pattern() if pattern else None
        flat[i] = orig - step
        fm = f()
        sig_m = pattern() if pattern else None
        flat[i] = orig
        if pattern is not None and not np.array_equal(sig_p, sig_m):
            continue
        grad.reshape(-1)[i] = (fp - fm) / (2 * step)
    return grad


def relative_error(analytic, numeric) -> float:
    """``|a - n| / max(|a|, |n|)`` over the checked (non-NaN) entries, with a tiny floor."""
    a = np.asarray(analytic, dtype=np.float64).reshape(-1)
    n = np.asarray(numeric, dtype=np.float64).reshape(-1)
    ok = ~np.isnan(n)
    if not ok.any():
        return 0.0
    diff = np.linalg.norm(a[ok] - n[ok])
    scale = max(np.linalg.norm(a[ok]), np.linalg.norm(n[ok]), 1e-10)
    return float(diff / scale)
