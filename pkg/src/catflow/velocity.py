"""Closed-form posteriors and velocities under a uniform source.

For a dataset ``{d_m}`` and a noisy sequence ``z`` at schedule value kappa,
every quantity is a mixture over dataset rows with weights proportional to
``gamma**(-hamming(d_m, z))``, ``gamma = (1 + (K-1) kappa) / (1 - kappa)``.

The ``oracle_*`` functions compute the same posteriors by summing the
mixture-path kernel over every source sequence. They are exponential in N
and exist to check the closed forms.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import CatflowError, ConfigError, DatasetStore, DomainError, Scheduler, kappa, kappa_dot
from .kernel import hamming_profile, log_gamma, posterior_weights

ORACLE_MAX_STATES = 10**6


class SingularityError(CatflowError, ValueError):
    pass


@dataclass(frozen=True)
class DistributionGrid:
    """``N x K`` table; rows are distributions or velocities over tokens."""

    values: np.ndarray
    semantics: str = "probability"

    @property
    def N(self) -> int:
        return self.values.shape[0]

    @property
    def K(self) -> int:
        return self.values.shape[1]

    def row_sums(self) -> np.ndarray:
        return self.values.sum(axis=1)


def _onehot(z: np.ndarray, K: int) -> np.ndarray:
    out = np.zeros((z.size, K))
    out[np.arange(z.size), z] = 1.0
    return out


def _balance(v: np.ndarray, z: np.ndarray) -> np.ndarray:
    """Set each row's entry at ``z^i`` to minus the sum of the others.

    Velocity rows sum to zero analytically; building the diagonal this way
    keeps that exact even when a large prefactor amplifies rounding in p.
    """
    idx = np.arange(z.size)
    v[idx, z] = 0.0
    v[idx, z] = -v.sum(axis=1)
    return v


def _weights(ds: DatasetStore, z: np.ndarray, k: float) -> np.ndarray:
    return posterior_weights(hamming_profile(ds, z), log_gamma(k, ds.K))


def agreement(ds: DatasetStore, z, k: float) -> np.ndarray:
    """Posterior mass, per position, of dataset rows that agree with ``z`` there."""
    z = ds.check_seq(z)
    w = _weights(ds, z, k)
    return w @ (ds.compact == z.astype(ds.compact.dtype))


def denoiser_forward(ds: DatasetStore, z, k: float) -> DistributionGrid:
    """Posterior over the clean token at each position given ``z``."""
    z = ds.check_seq(z)
    w = _weights(ds, z, k)
    N, K = ds.N, ds.K
    flat = (np.arange(N) * K + ds.rows).ravel()
    p = np.bincount(flat, weights=np.repeat(w, N), minlength=N * K).reshape(N, K)
    return DistributionGrid(p, "probability")


def velocity_forward(ds: DatasetStore, z, t: float, s: Scheduler) -> DistributionGrid:
    if t == 1.0:
        raise SingularityError(
            "forward velocity is singular at t=1; use the final denoiser jump instead"
        )
    k = kappa(s, t)
    z = ds.check_seq(z)
    p = denoiser_forward(ds, z, k).values
    v = kappa_dot(s, t) / (1.0 - k) * (p - _onehot(z, ds.K))
    return DistributionGrid(_balance(v, z), "velocity")


def _noise_factor(z: np.ndarray, K: int) -> np.ndarray:
    # K * delta_x(z^i) - 1
    return K * _onehot(z, K) - 1.0


def noise_predictor(ds: DatasetStore, z, k: float) -> DistributionGrid:
    """Posterior over the source token at each position given ``z``."""
    z = ds.check_seq(z)
    s = agreement(ds, z, k)
    c = k / (1.0 + (ds.K - 1) * k)
    p = _onehot(z, ds.K) - c * _noise_factor(z, ds.K) * s[:, None]
    return DistributionGrid(p, "probability")


def velocity_backward(ds: DatasetStore, z, t: float, s: Scheduler) -> DistributionGrid:
    """Backward velocity; at t=1 the nearest-row limit of the weights is used."""
    k = kappa(s, t)
    z = ds.check_seq(z)
    a = agreement(ds, z, k)
    c = kappa_dot(s, t) / (1.0 + (ds.K - 1) * k)
    v = c * _noise_factor(z, ds.K) * a[:, None]
    return DistributionGrid(_balance(v, z), "velocity")


# ---------------------------------------------------------------------------
# brute-force oracles


def _enumerate(ds: DatasetStore, z, k: float):
    z = ds.check_seq(z)
    N, K = ds.N, ds.K
    if K**N > ORACLE_MAX_STATES:
        raise ConfigError(f"oracle instance too large: K**N = {K}**{N}")
    if not 0.0 <= k <= 1.0:
        raise DomainError(f"kappa {k} outside [0, 1]")
    x0 = np.indices((K,) * N).reshape(N, -1).T  # (K**N, N)
    data_term = k * (ds.rows == z)[:, None, :]
    src_term = (1.0 - k) * (x0 == z)[None, :, :]
    kern = np.prod(data_term + src_term, axis=2)  # (M, K**N)
    total = kern.sum()
    if total == 0.0:
        raise DomainError("z has zero probability under the path at this kappa")
    return z, x0, kern, total


def oracle_denoiser(ds: DatasetStore, z, k: float) -> DistributionGrid:
    _, _, kern, total = _enumerate(ds, z, k)
    per_row = kern.sum(axis=1)
    N, K = ds.N, ds.K
    p = np.zeros((N, K))
    for i in range(N):
        p[i] = np.bincount(ds.rows[:, i], weights=per_row, minlength=K)
    return DistributionGrid(p / total, "probability")


def oracle_noise_predictor(ds: DatasetStore, z, k: float) -> DistributionGrid:
    _, x0, kern, total = _enumerate(ds, z, k)
    per_source = kern.sum(axis=0)
    N, K = ds.N, ds.K
    p = np.zeros((N, K))
    for i in range(N):
        p[i] = np.bincount(x0[:, i], weights=per_source, minlength=K)
    return DistributionGrid(p / total, "probability")

