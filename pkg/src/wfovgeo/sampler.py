"""Distance-softmax view sampling for assembling multi-view batches."""

from __future__ import annotations

import numpy as np

from .errors import InputError


def check_distance_matrix(d: np.ndarray) -> np.ndarray:
    d = np.asarray(d, dtype=float)
    if d.ndim != 2 or d.shape[0] != d.shape[1]:
        raise InputError("distance matrix must be square")
    if d.shape[0] < 2:
        raise InputError("need at least two cameras")
    if np.abs(d - d.T).max() > 1e-12:
        raise InputError("distance matrix must be symmetric")
    if np.abs(np.diag(d)).max() > 1e-12:
        raise InputError("distance matrix diagonal must be zero")
    if np.any(d < 0.0):
        raise InputError("distances must be non-negative")
    return d


def distance_matrix_from_positions(positions) -> np.ndarray:
    p = np.asarray(positions, dtype=float).reshape(-1, 3)
    diff = p[:, None, :] - p[None, :, :]
    d = np.sqrt(np.sum(diff ** 2, axis=-1))
    np.fill_diagonal(d, 0.0)
    return np.maximum(d, d.T)  # exact symmetry despite rounding


def probability_matrix(d, temperature: float = 1.0) -> np.ndarray:
    """Row-stochastic softmax of negative distances, zero diagonal.

    Row i is softmax over j != i of -d[i, j] / temperature.
    """
    d = check_distance_matrix(d)
    if temperature <= 0.0:
        raise InputError("temperature must be positive")
    n = d.shape[0]
    logits = -d / temperature
    np.fill_diagonal(logits, -np.inf)
    shift = logits.max(axis=1, keepdims=True)
    p = np.exp(logits - shift)
    np.fill_diagonal(p, 0.0)
    return p / p.sum(axis=1, keepdims=True)


def sample_views(p, k: int, seed: int) -> list:
    """Chained sampling of k distinct view indices.

    The anchor is uniform; each further view is drawn from the current view's
    probability row renormalized over the unchosen indices. Counter-based
    (Philox) pseudo-randomness with explicit inverse-CDF draws keeps the
    output reproducible across platforms for a fixed seed.
    """
    p = np.asarray(p, dtype=float)
    if p.ndim != 2 or p.shape[0] != p.shape[1]:
        raise InputError("probability matrix must be square")
    n = p.shape[0]
    if np.abs(p.sum(axis=1) - 1.0).max() > 1e-9 or np.abs(np.diag(p)).max() > 0.0:
        raise InputError("rows must sum to 1 with a zero diagonal")
    if not (2 <= k <= n):
        raise InputError("k must satisfy 2 <= k <= n")

    rng = np.random.Generator(np.random.Philox(seed))
    current = int(rng.integers(n))
    chosen = [current]
    available = np.ones(n, dtype=bool)
    available[current] = False
    for _ in range(k - 1):
        pool = np.flatnonzero(available)
        w = p[current][pool]
        total = w.sum()
        if total <= 0.0:
            w = np.ones_like(w)  # remaining mass all rounded away
            total = w.sum()
        cdf = np.cumsum(w / total)
        pick = int(np.searchsorted(cdf, rng.random(), side="right"))
        nxt = int(pool[min(pick, pool.size - 1)])
        chosen.append(nxt)
        available[nxt] = False
        current = nxt
    return chosen
