"""Categorical Euler transport: forward sampling, inversion and pairing.

Pairing inverts every dataset row to a source sequence with the closed-form
backward velocity. Each row draws its randomness from its own stream
(``SeedSpec.stream(row)``), so the pair file is identical for any worker
count.
"""

from __future__ import annotations

import logging
import math
import os
import struct
import zlib
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from . import _kernels
from .core import (
    ROW_STREAM,
    SAMPLE_STREAM,
    SCHEDULER_KINDS,
    TOKEN_DTYPE,
    CatflowError,
    ConfigError,
    DatasetStore,
    LoadError,
    PathLike,
    Scheduler,
    SeedSpec,
    TimeGrid,
    kappa,
    kappa_dot,
)
from .kernel import SubsetView, log_gamma, partition_subsets
from .velocity import DistributionGrid

logger = logging.getLogger(__name__)

FINAL_RULES = ("sample", "argmax")
CHUNK_ROWS = 256


class StepSizeError(CatflowError, ValueError):
    pass


class ChecksumError(LoadError):
    pass


@dataclass(frozen=True)
class StepConfig:
    T: int = 20
    final_rule: str = "sample"
    clamp: bool = True

    def __post_init__(self):
        if int(self.T) < 1:
            raise ConfigError(f"step count must be >= 1, got {self.T}")
        if self.final_rule not in FINAL_RULES:
            raise ConfigError(f"final rule must be one of {FINAL_RULES}")

    @property
    def h(self) -> float:
        return 1.0 / self.T


def default_threads() -> int:
    env = os.environ.get("PAIRFLOW_THREADS")
    if env:
        return max(1, int(env))
    return os.cpu_count() or 1


# ---------------------------------------------------------------------------
# single step


def step_categorical(z, grid: DistributionGrid, h: float, sign: int, rng: np.random.Generator,
                     clamp: bool = True) -> np.ndarray:
    """One Euler step: token i is drawn from ``delta_{z^i} + sign * h * v[i]``.

    Positions are sampled independently. With ``clamp`` negative entries are
    floored at zero and the row renormalized; otherwise a negative entry
    raises :class:`StepSizeError`.
    """
    if sign not in (1, -1):
        raise ConfigError("sign must be +1 or -1")
    z = np.asarray(z)
    N, K = grid.values.shape
    probs = sign * h * grid.values
    probs[np.arange(N), z] += 1.0
    out = np.empty(N, dtype=TOKEN_DTYPE)
    bad = _kernels.step_rows(probs, rng.random(N), clamp, out)
    if bad >= 0:
        raise StepSizeError(
            f"step size {h} gives a negative probability at position {bad}; "
            "reduce h or enable clamping"
        )
    return out


# ---------------------------------------------------------------------------
# schedules on the time grid


def _schedule(s: Scheduler, K: int, times: np.ndarray):
    kap = np.array([kappa(s, t) for t in times])
    kdot = np.array([kappa_dot(s, t) for t in times])
    if not np.all(np.isfinite(kdot)):
        raise ConfigError(f"scheduler {s} has an unbounded rate on this grid")
    lg = np.array([log_gamma(k, K) for k in kap])
    return kap, kdot, lg


def backward_schedule(s: Scheduler, K: int, T: int):
    """Evaluation nodes ``1 - k/T`` for k = 0..T-1 (starting exactly at t = 1)."""
    return _schedule(s, K, TimeGrid(T, "backward").nodes[:-1])


def forward_schedule(s: Scheduler, K: int, T: int):
    """Euler nodes ``k/T`` for k = 0..T-2; the last interval is the denoiser jump."""
    return _schedule(s, K, TimeGrid(T, "forward").nodes[: T - 1])


def _raise_step_error(code: int, N: int, rows: Sequence[int], h: float):
    r, i = divmod(int(code), N)
    raise StepSizeError(
        f"row {rows[r]}: step size {h} gives a negative probability at position {i}"
    )


# ---------------------------------------------------------------------------
# forward sampling


def sample_forward(ds: DatasetStore, cfg: StepConfig, s: Scheduler,
                   rng: np.random.Generator, x0=None) -> np.ndarray:
    """Transport a uniform source draw to a dataset sample.

    ``T - 1`` Euler steps on ``k/T`` are followed by a jump to the limit
    denoiser, sampled or taken greedily per ``cfg.final_rule``. ``x0`` fixes
    the source draw instead of sampling it from ``rng``.
    """
    if x0 is None:
        x0 = rng.integers(0, ds.K, ds.N)
    start = ds.check_seq(x0).astype(ds.compact.dtype)[None, :]
    u = rng.random((cfg.T, ds.N))[None]
    out = np.empty((1, ds.N), dtype=TOKEN_DTYPE)
    _forward_block(ds, start, u, cfg, s, out, [0])
    return out[0]


def _forward_block(ds, starts, uniforms, cfg, s, out, rows):
    kap, kdot, lg = forward_schedule(s, ds.K, cfg.T)
    clamps = np.zeros(len(starts), dtype=np.int64)
    code = _kernels.forward_rows(
        ds.compact, starts, uniforms, kap, kdot, lg, cfg.h, ds.K,
        cfg.final_rule == "argmax", cfg.clamp, out, clamps,
    )
    if code >= 0:
        _raise_step_error(code, ds.N, rows, cfg.h)
    return int(clamps.sum())


def sample_many(ds: DatasetStore, count: int, cfg: StepConfig, s: Scheduler, seeds: SeedSpec,
                threads: Optional[int] = None) -> np.ndarray:
    """``count`` forward samples; sample j uses stream ``(SAMPLE_STREAM, j)``."""
    out = np.empty((count, ds.N), dtype=TOKEN_DTYPE)

    def work(lo, hi):
        starts = np.empty((hi - lo, ds.N), dtype=ds.compact.dtype)
        u = np.empty((hi - lo, cfg.T, ds.N))
        for r, j in enumerate(range(lo, hi)):
            g = seeds.stream(j, SAMPLE_STREAM)
            starts[r] = g.integers(0, ds.K, ds.N)
            u[r] = g.random((cfg.T, ds.N))
        return _forward_block(ds, starts, u, cfg, s, out[lo:hi], range(lo, hi))

    clamps = _run_chunks(work, count, threads)
    if clamps:
        logger.info("forward sampling clamped %d negative step probabilities", clamps)
    return out


# ---------------------------------------------------------------------------
# inversion and pairing


def invert(ds: DatasetStore | SubsetView, x1, cfg: StepConfig, s: Scheduler,
           rng: np.random.Generator) -> np.ndarray:
    """Transport ``x1`` backward from t=1 to t=0 with the closed-form velocity."""
    if isinstance(ds, SubsetView):
        ds = ds.store
    start = ds.check_seq(x1).astype(ds.compact.dtype)[None, :]
    u = rng.random((cfg.T, ds.N))[None]
    out = np.empty((1, ds.N), dtype=TOKEN_DTYPE)
    _invert_block(ds, start, u, cfg, s, out, [0])
    return out[0]


def _invert_block(ds, starts, uniforms, cfg, s, out, rows):
    kap, kdot, lg = backward_schedule(s, ds.K, cfg.T)
    clamps = np.zeros(len(starts), dtype=np.int64)
    code = _kernels.invert_rows(
        ds.compact, starts, uniforms, kap, kdot, lg, cfg.h, ds.K, cfg.clamp, out, clamps
    )
    if code >= 0:
        _raise_step_error(code, ds.N, rows, cfg.h)
    return int(clamps.sum())


@dataclass
class PairSet:
    """Coupled ``(x0, x1)`` pairs, one per dataset row, ordered by row."""

    x0: np.ndarray
    x1: np.ndarray
    row_index: np.ndarray
    subset_id: np.ndarray
    K: int
    seed: int = 0
    T: int = 0
    scheduler: str = "linear"
    subsets: int = 1
    extra: dict = field(default_factory=dict)

    @property
    def M(self) -> int:
        return self.x0.shape[0]

    @property
    def N(self) -> int:
        return self.x0.shape[1]

    def __len__(self):
        return self.M


def pairflow(ds: DatasetStore, cfg: StepConfig, s: Scheduler, seeds: SeedSpec,
             subsets: int = 1, threads: Optional[int] = None,
             progress: Optional[Callable[[int], None]] = None) -> PairSet:
    """Invert every dataset row to a source sequence (closed-form backward transport).

    With ``subsets > 1`` rows are split into random balanced subsets and each
    row's posterior is computed only over its own subset.
    """
    views = partition_subsets(ds, subsets, seeds)
    M, N = ds.M, ds.N
    x0 = np.empty((M, N), dtype=TOKEN_DTYPE)
    sid = np.empty(M, dtype=np.uint32)
    clamps = 0
    for view in views:
        sub = view.store
        idx = view.indices
        sid[idx] = view.subset_id
        part = np.empty((view.M, N), dtype=TOKEN_DTYPE)

        def work(lo, hi, sub=sub, idx=idx, part=part):
            rows = idx[lo:hi]
            u = np.empty((hi - lo, cfg.T, N))
            for r, row in enumerate(rows):
                u[r] = seeds.stream(int(row), ROW_STREAM).random((cfg.T, N))
            n = _invert_block(sub, sub.compact[lo:hi], u, cfg, s, part[lo:hi], rows)
            if progress is not None:
                progress(hi - lo)
            return n

        clamps += _run_chunks(work, view.M, threads)
        x0[idx] = part
    if clamps:
        logger.info("pairing clamped %d negative step probabilities", clamps)
    return PairSet(
        x0=x0,
        x1=ds.rows.copy(),
        row_index=np.arange(M, dtype=np.uint64),
        subset_id=sid,
        K=ds.K,
        seed=seeds.master,
        T=cfg.T,
        scheduler=s.kind,
        subsets=subsets,
        extra={"clamped": clamps},
    )


def _run_chunks(work, n: int, threads: Optional[int]) -> int:
    if threads is None:
        threads = default_threads()
    bounds = [(lo, min(lo + CHUNK_ROWS, n)) for lo in range(0, n, CHUNK_ROWS)]
    if threads <= 1 or len(bounds) <= 1:
        return sum(work(lo, hi) for lo, hi in bounds)
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return sum(pool.map(lambda b: work(*b), bounds))


# ---------------------------------------------------------------------------
# DPAIR files

DPAIR_MAGIC = b"DPAIR"
DPAIR_VERSION = 1
_DPAIR_HEADER = struct.Struct("<5sBIIQBIIQ")


def _record_dtype(N: int) -> np.dtype:
    return np.dtype([("row", "<u8"), ("subset", "<u4"), ("x0", "<u4", (N,)), ("x1", "<u4", (N,))])


def encode_pairs(ps: PairSet) -> bytes:
    head = _DPAIR_HEADER.pack(
        DPAIR_MAGIC, DPAIR_VERSION, ps.N, ps.K, ps.M,
        SCHEDULER_KINDS.index(ps.scheduler), ps.T, ps.subsets, ps.seed,
    )
    rec = np.empty(ps.M, dtype=_record_dtype(ps.N))
    rec["row"] = ps.row_index
    rec["subset"] = ps.subset_id
    rec["x0"] = ps.x0
    rec["x1"] = ps.x1
    payload = head + rec.tobytes()
    return payload + struct.pack("<I", zlib.crc32(payload))


def write_pairs(ps: PairSet, path: PathLike) -> None:
    """Write a DPAIR file; the trailing CRC32 covers header and records."""
    with open(path, "wb") as f:
        f.write(encode_pairs(ps))


def decode_pairs(data: bytes) -> PairSet:
    if len(data) < _DPAIR_HEADER.size + 4:
        raise ChecksumError("pair file truncated")
    payload, crc = data[:-4], struct.unpack("<I", data[-4:])[0]
    if zlib.crc32(payload) != crc:
        raise ChecksumError("pair file checksum mismatch")
    magic, version, N, K, M, kind, T, S, seed = _DPAIR_HEADER.unpack_from(payload)
    if magic != DPAIR_MAGIC:
        raise LoadError(f"bad magic {magic!r}")
    if version != DPAIR_VERSION:
        raise LoadError(f"unsupported DPAIR version {version}")
    if kind >= len(SCHEDULER_KINDS):
        raise LoadError(f"unknown scheduler code {kind}")
    dt = _record_dtype(N)
    body = payload[_DPAIR_HEADER.size:]
    if len(body) != M * dt.itemsize:
        raise LoadError(f"expected {M} records, payload has {len(body)} bytes")
    rec = np.frombuffer(body, dtype=dt)
    return PairSet(
        x0=rec["x0"].copy(),
        x1=rec["x1"].copy(),
        row_index=rec["row"].copy(),
        subset_id=rec["subset"].copy(),
        K=K,
        seed=seed,
        T=T,
        scheduler=SCHEDULER_KINDS[kind],
        subsets=S,
    )


def read_pairs(path: PathLike) -> PairSet:
    with open(path, "rb") as f:
        return decode_pairs(f.read())
