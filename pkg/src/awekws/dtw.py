"""Cosine dynamic time warping: full alignment and subsequence search.

Cost is the minimum over monotonic paths of (sum of local distances) /
(path cell count). The ratio itself is minimized, not the sum: the DP
tracks, for every exact path length L, the cheapest L-cell path into each
cell, then compares sums divided by their own L. Minimizing the sum first
and dividing afterwards picks wrong paths when a longer path has a lower
average.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .corpus import FeatureSequence
from .errors import DimMismatch, EmptySequence, ZeroNormFrame

_DIAG, _UP, _LEFT, _START = 0, 1, 2, 3


@dataclass(frozen=True)
class DtwResult:
    cost: float
    path: tuple
    region: tuple[int, int]


def _frames(x) -> np.ndarray:
    f = x.frames if isinstance(x, FeatureSequence) else np.asarray(x)
    if f.ndim != 2 or f.shape[0] < 1:
        raise EmptySequence("expected a nonempty (T, D) frame matrix")
    return f.astype(np.float64, copy=False)


def cosine_distance_matrix(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """d[i, j] = (1 - cosine(a_i, b_j)) / 2, clipped into [0, 1]."""
    if a.shape[1] != b.shape[1]:
        raise DimMismatch(f"feature dims differ: {a.shape[1]} vs {b.shape[1]}")
    na = np.linalg.norm(a, axis=1)
    nb = np.linalg.norm(b, axis=1)
    if np.any(na == 0.0) or np.any(nb == 0.0):
        raise ZeroNormFrame("zero-norm frame; normalize inputs upstream")
    sim = (a / na[:, None]) @ (b / nb[:, None]).T
    return np.clip((1.0 - sim) * 0.5, 0.0, 1.0)


def _ratio_dtw(d: np.ndarray, free_ends: bool) -> DtwResult:
    """Shared DP. free_ends=False pins the path to (0,0)..(Ta-1,Tb-1);
    free_ends=True lets it enter and leave anywhere on the b axis.

    Ties prefer the diagonal step, then shorter paths, then earlier end.
    """
    ta, tb = d.shape
    n_levels = ta + tb - 1
    choice = np.full((n_levels, ta, tb), -1, dtype=np.int8)

    level_sum = np.full((ta, tb), np.inf)
    if free_ends:
        level_sum[0, :] = d[0, :]
        choice[0, 0, :] = _START
    else:
        level_sum[0, 0] = d[0, 0]
        choice[0, 0, 0] = _START

    best_cost = np.inf
    best_len = -1
    best_end = -1

    def scan_ends(level: int, sums: np.ndarray) -> None:
        nonlocal best_cost, best_len, best_end
        last = sums[ta - 1] if free_ends else sums[ta - 1, tb - 1:]
        j = int(np.argmin(last))
        cost = last[j] / (level + 1)
        if cost < best_cost:
            best_cost = cost
            best_len = level
            best_end = j if free_ends else tb - 1

    scan_ends(0, level_sum)
    cand = np.empty((3, ta, tb))
    for level in range(1, n_levels):
        cand.fill(np.inf)
        cand[_DIAG, 1:, 1:] = level_sum[:-1, :-1]
        cand[_UP, 1:, :] = level_sum[:-1, :]
        cand[_LEFT, :, 1:] = level_sum[:, :-1]
        pick = np.argmin(cand, axis=0)
        prior = np.min(cand, axis=0)
        reachable = np.isfinite(prior)
        level_sum = d + prior
        choice[level][reachable] = pick[reachable]
        scan_ends(level, level_sum)

    path = []
    i, j, level = ta - 1, best_end, best_len
    while True:
        path.append((i, j))
        step = choice[level, i, j]
        if step == _START:
            break
        if step == _DIAG:
            i, j = i - 1, j - 1
        elif step == _UP:
            i -= 1
        else:
            j -= 1
        level -= 1
    path.reverse()
    return DtwResult(float(best_cost), tuple(path), (path[0][1], path[-1][1] + 1))


def dtw_cost(a, b) -> DtwResult:
    """Full-sequence alignment cost between two frame sequences."""
    return _ratio_dtw(cosine_distance_matrix(_frames(a), _frames(b)), free_ends=False)


def dtw_search(template, utterance) -> DtwResult:
    """Best match of the whole template against any contiguous region of
    the utterance; region is (start, end) with end exclusive."""
    return _ratio_dtw(cosine_distance_matrix(_frames(template), _frames(utterance)),
                      free_ends=True)
