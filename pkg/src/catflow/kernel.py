"""Hamming distances and gamma-weighted posterior weights over a dataset."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .core import PARTITION_STREAM, ConfigError, DatasetStore, DomainError, SeedSpec

# log-gamma value meaning "kappa == 1": weights collapse onto the nearest rows
LIMIT = math.inf


def hamming(a, b) -> int:
    a = np.asarray(a)
    b = np.asarray(b)
    if a.shape != b.shape or a.ndim != 1:
        raise DomainError(f"length mismatch: {a.shape} vs {b.shape}")
    return int(np.count_nonzero(a != b))


def hamming_profile(ds: DatasetStore, z) -> np.ndarray:
    """Hamming distance from ``z`` to every dataset row, in row order."""
    z = ds.check_seq(z).astype(ds.compact.dtype)
    return np.count_nonzero(ds.compact != z, axis=1)


def log_gamma(kappa: float, K: int) -> float:
    """``log((1 + (K-1) kappa) / (1 - kappa))``; :data:`LIMIT` at kappa = 1."""
    kappa = float(kappa)
    if not 0.0 <= kappa <= 1.0:
        raise DomainError(f"kappa {kappa} outside [0, 1]")
    if kappa == 1.0:
        return LIMIT
    return math.log1p((K - 1) * kappa) - math.log1p(-kappa)


def posterior_weights(profile, log_gamma: float) -> np.ndarray:
    """Normalized weights ``gamma**(-h_m)`` for a Hamming profile.

    Evaluated as a max-subtracted softmax of ``-h_m * log_gamma``. With
    ``log_gamma == LIMIT`` the weights are uniform over the rows of minimal
    Hamming distance and exactly zero elsewhere.
    """
    h = np.asarray(profile)
    if h.size == 0:
        raise DomainError("empty Hamming profile")
    hmin = h.min()
    if math.isinf(log_gamma):
        w = (h == hmin).astype(np.float64)
    else:
        w = np.exp(-(h - hmin).astype(np.float64) * log_gamma)
    return w / w.sum()


@dataclass(frozen=True)
class SubsetView:
    """Rows of a dataset restricted to one subset, in ascending row order."""

    subset_id: int
    indices: np.ndarray
    store: DatasetStore

    @property
    def M(self) -> int:
        return len(self.indices)


def partition_subsets(ds: DatasetStore, S: int, seeds: SeedSpec) -> list[SubsetView]:
    """Split the rows into ``S`` random, balanced, disjoint subsets.

    A random permutation of row indices is cut into contiguous chunks whose
    sizes differ by at most one. ``S == 1`` returns the whole dataset.
    """
    if not 1 <= S <= ds.M:
        raise ConfigError(f"subset count {S} must be in [1, {ds.M}]")
    if S == 1:
        return [SubsetView(0, np.arange(ds.M), ds)]
    perm = seeds.stream(0, PARTITION_STREAM).permutation(ds.M)
    views = []
    for sid, chunk in enumerate(np.array_split(perm, S)):
        idx = np.sort(chunk)
        views.append(SubsetView(sid, idx, ds.take(idx)))
    return views


def membership(views: list[SubsetView], M: int) -> np.ndarray:
    """Subset id of every dataset row."""
    out = np.full(M, -1, dtype=np.int64)
    for v in views:
        out[v.indices] = v.subset_id
    return out
