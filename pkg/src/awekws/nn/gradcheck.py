"""Finite-difference gradient verification helpers."""

from __future__ import annotations

import numpy as np

FD_STEP = 1e-5
# Relative error denominator is floored so near-zero gradients compare on an
# absolute scale instead of blowing up the ratio.
REL_FLOOR = 1e-6


def numeric_gradient(fn, arrays: dict[str, np.ndarray], h: float = FD_STEP) -> dict[str, np.ndarray]:
    """Central differences of a scalar fn(arrays) w.r.t. every array entry.

    Perturbs the dicts' arrays in place and restores them, so fn may close
    over the same storage.
    """
    grads = {}
    for name, arr in arrays.items():
        g = np.zeros_like(arr, dtype=np.float64)
        flat = arr.reshape(-1)
        gflat = g.reshape(-1)
        for i in range(flat.size):
            orig = flat[i]
            flat[i] = orig + h
            fp = fn()
            flat[i] = orig - h
            fm = fn()
            flat[i] = orig
            gflat[i] = (fp - fm) / (2.0 * h)
        grads[name] = g
    return grads


def max_relative_error(analytic: dict[str, np.ndarray],
                       numeric: dict[str, np.ndarray]) -> tuple[float, str]:
    """Worst |a - n| / max(|a|, |n|, floor) over all entries; returns (err, where)."""
    worst = 0.0
    where = ""
    for name in numeric:
        a = np.asarray(analytic.get(name, np.zeros_like(numeric[name])), dtype=np.float64)
        n = numeric[name]
        denom = np.maximum(np.maximum(np.abs(a), np.abs(n)), REL_FLOOR)
        rel = np.abs(a - n) / denom
        idx = int(np.argmax(rel))
        if rel.reshape(-1)[idx] > worst:
            worst = float(rel.reshape(-1)[idx])
            where = f"{name}[{np.unravel_index(idx, n.shape)}]"
    return worst, where
