"""Synthetic token datasets for demos, tests and benchmarks."""

from __future__ import annotations

import numpy as np

from .core import ConfigError


def separated(M: int, N: int, K: int, rng: np.random.Generator, min_distance: int = 2) -> np.ndarray:
    """``M`` random rows with pairwise Hamming distance at least ``min_distance``.

    Rows are drawn uniformly and kept greedily, so the set is spread evenly
    over the token space.
    """
    if K ** N < M:
        raise ConfigError(f"cannot place {M} distinct rows in a space of {K}**{N}")
    rows = np.empty((M, N), dtype=np.uint32)
    n = 0
    tries = 0
    while n < M:
        cand = rng.integers(0, K, N).astype(np.uint32)
        tries += 1
        if tries > 1000 * M:
            raise ConfigError("could not reach the requested separation")
        if n and np.count_nonzero(rows[:n] != cand, axis=1).min() < min_distance:
            continue
        rows[n] = cand
        n += 1
    return rows


def clustered(M: int, N: int, K: int, rng: np.random.Generator, flip: float = 0.1,
              clusters: int = 2) -> np.ndarray:
    """Noisy copies of a few random centres.

    With two clusters the second centre is the first shifted by K // 2 at
    every position, so for K = 2 the centres are complements. Each token of a
    copy is replaced by a different uniform token with probability ``flip``.
    """
    if not 0.0 <= flip <= 1.0:
        raise ConfigError("flip rate must lie in [0, 1]")
    base = rng.integers(0, K, N)
    if clusters == 2:
        centres = np.stack([base, (base + K // 2) % K])
    else:
        centres = rng.integers(0, K, (clusters, N))
    label = rng.integers(0, clusters, M)
    rows = centres[label].copy()
    mask = rng.random((M, N)) < flip
    if K > 1:
        shift = rng.integers(1, K, (M, N))
        rows = np.where(mask, (rows + shift) % K, rows)
    return rows.astype(np.uint32)
