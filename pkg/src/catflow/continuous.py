"""Closed-form flow velocity for a standard Gaussian source in R^D.

With the linear path ``x_t = (1 - t) x0 + t x1`` and an empirical target
``{d_m}``, the marginal velocity is a softmax-weighted pull toward the data:

    v(x, t) = sum_m w_m (d_m - x) / (1 - t),
    w = softmax_m(-|x - t d_m|^2 / (2 (1 - t)^2)).
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy.spatial import cKDTree
from scipy.special import softmax

from .core import ConfigError, DomainError, LoadError, PathLike
from .velocity import SingularityError

CPTS_MAGIC = b"CPTS"
CPTS_VERSION = 1
_CPTS_HEADER = struct.Struct("<4sBIQ")

SNAP_TOL = 1e-3
BATCH = 512

# standard two-moons geometry: upper arc centred at (0, 0), lower arc at (1, 0.5)
MOON_RADIUS = 1.0
MOON_OFFSET = (1.0, 0.5)
MOON_NOISE = 0.05


@dataclass(frozen=True, eq=False)
class PointSet:
    points: np.ndarray

    def __post_init__(self):
        pts = np.ascontiguousarray(self.points, dtype=np.float64)
        if pts.ndim != 2:
            raise DomainError("point set must be a 2-d array")
        if not np.all(np.isfinite(pts)):
            raise DomainError("point set contains non-finite values")
        pts.setflags(write=False)
        object.__setattr__(self, "points", pts)

    @property
    def M(self) -> int:
        return self.points.shape[0]

    @property
    def D(self) -> int:
        return self.points.shape[1]

    def __len__(self):
        return self.M


def _velocity_batch(d: np.ndarray, dsq: np.ndarray, x: np.ndarray, t: float) -> np.ndarray:
    # |x - t d|^2 expanded; clipped at 0 against cancellation
    sq = (x * x).sum(1)[:, None] - 2.0 * t * (x @ d.T) + (t * t) * dsq[None, :]
    np.maximum(sq, 0.0, out=sq)
    w = softmax(-0.5 * sq / (1.0 - t) ** 2, axis=1)
    return (w @ d - x) / (1.0 - t)


def velocity_gaussian(ps: PointSet, x, t: float) -> np.ndarray:
    """Closed-form velocity at ``x`` (shape ``(D,)`` or ``(B, D)``) and time t < 1."""
    if not 0.0 <= t <= 1.0:
        raise DomainError(f"time {t} outside [0, 1]")
    if t == 1.0:
        raise SingularityError("Gaussian-source velocity is singular at t=1")
    x = np.asarray(x, dtype=np.float64)
    single = x.ndim == 1
    xb = np.atleast_2d(x)
    d = ps.points
    diff = xb[:, None, :] - t * d[None, :, :]
    logits = -0.5 * (diff * diff).sum(-1) / (1.0 - t) ** 2
    w = softmax(logits, axis=1)
    v = (w @ d - xb) / (1.0 - t)
    return v[0] if single else v


@dataclass
class ContinuousPairs:
    """Source draws and their transported endpoints; ``row`` is -1 when unsnapped."""

    x0: np.ndarray
    x1: np.ndarray
    row: np.ndarray
    raw: np.ndarray

    @property
    def snapped(self) -> np.ndarray:
        return self.row >= 0

    @property
    def snap_rate(self) -> float:
        return float(self.snapped.mean()) if len(self.row) else 0.0


def integrate_forward(ps: PointSet, x0, T: int, snap_tol: float = SNAP_TOL) -> ContinuousPairs:
    """Euler-integrate from t=0 to t=1 on nodes k/T, then snap to the nearest point.

    Accepts a single start ``(D,)`` or a batch ``(B, D)``. A terminal state
    within ``snap_tol`` of a dataset point is replaced by that point.
    """
    if T < 1:
        raise ConfigError(f"step count must be >= 1, got {T}")
    x0 = np.atleast_2d(np.asarray(x0, dtype=np.float64))
    if x0.shape[1] != ps.D:
        raise DomainError(f"start dimension {x0.shape[1]} does not match D={ps.D}")
    d = ps.points
    dsq = (d * d).sum(1)
    h = 1.0 / T
    raw = np.empty_like(x0)
    for lo in range(0, len(x0), BATCH):
        x = x0[lo:lo + BATCH].copy()
        for k in range(T):
            x += h * _velocity_batch(d, dsq, x, k / T)
        raw[lo:lo + BATCH] = x
    dist, idx = cKDTree(d).query(raw)
    ok = dist <= snap_tol
    x1 = np.where(ok[:, None], d[idx], raw)
    return ContinuousPairs(x0, x1, np.where(ok, idx, -1), raw)


def two_moons_nfold(folds: int, samples: int, noise: float = MOON_NOISE,
                    rng: np.random.Generator | None = None) -> PointSet:
    """``samples`` points of the ``folds``-fold product of 2-D two-moons (D = 2 * folds)."""
    if folds < 1:
        raise ConfigError("folds must be >= 1")
    rng = np.random.default_rng() if rng is None else rng
    theta = rng.uniform(0.0, np.pi, (samples, folds))
    lower = rng.random((samples, folds)) < 0.5
    x = np.where(lower, MOON_OFFSET[0] - MOON_RADIUS * np.cos(theta), MOON_RADIUS * np.cos(theta))
    y = np.where(lower, MOON_OFFSET[1] - MOON_RADIUS * np.sin(theta), MOON_RADIUS * np.sin(theta))
    pts = np.stack([x, y], axis=2).reshape(samples, 2 * folds)
    if noise > 0:
        pts = pts + noise * rng.standard_normal(pts.shape)
    return PointSet(pts)


def chamfer(a: PointSet, b: PointSet, first_two_only: bool = False, squared: bool = True) -> float:
    """Symmetric Chamfer distance: mean nearest distance a->b plus b->a."""
    pa, pb = a.points, b.points
    if len(pa) == 0 or len(pb) == 0:
        raise DomainError("Chamfer distance of an empty set")
    if first_two_only:
        if pa.shape[1] < 2 or pb.shape[1] < 2:
            raise DomainError("projection needs at least two coordinates")
        pa, pb = pa[:, :2], pb[:, :2]
    elif pa.shape[1] != pb.shape[1]:
        raise DomainError("point sets have different dimensions")
    dab, _ = cKDTree(pb).query(pa)
    dba, _ = cKDTree(pa).query(pb)
    if squared:
        dab, dba = dab**2, dba**2
    return float(dab.mean() + dba.mean())


# ---------------------------------------------------------------------------
# files


def write_points(ps: PointSet, path: PathLike) -> None:
    with open(path, "wb") as f:
        f.write(_CPTS_HEADER.pack(CPTS_MAGIC, CPTS_VERSION, ps.D, ps.M))
        f.write(ps.points.astype("<f8").tobytes())


def read_points(path: PathLike) -> PointSet:
    data = Path(path).read_bytes()
    if len(data) < _CPTS_HEADER.size:
        raise LoadError("truncated CPTS header")
    magic, version, D, M = _CPTS_HEADER.unpack_from(data)
    if magic != CPTS_MAGIC:
        raise LoadError(f"bad magic {magic!r}")
    if version != CPTS_VERSION:
        raise LoadError(f"unsupported CPTS version {version}")
    body = data[_CPTS_HEADER.size:]
    if len(body) != 8 * D * M:
        raise LoadError(f"expected {M}x{D} floats, payload has {len(body)} bytes")
    return PointSet(np.frombuffer(body, dtype="<f8").reshape(M, D))


def load_points(path: PathLike) -> PointSet:
    """Read CPTS, or CSV when the extension is ``.csv``."""
    if Path(path).suffix.lower() == ".csv":
        return PointSet(np.loadtxt(path, delimiter=",", ndmin=2))
    return read_points(path)


def save_points(ps: PointSet, path: PathLike) -> None:
    if Path(path).suffix.lower() == ".csv":
        np.savetxt(path, ps.points, delimiter=",", fmt="%.17g")
    else:
        write_points(ps, path)
