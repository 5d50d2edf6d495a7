"""Shared types: schedulers, time grids, seeds and token dataset storage."""

from __future__ import annotations

import csv
import math
import struct
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Union

import numpy as np

PathLike = Union[str, Path]

TOKEN_DTYPE = np.dtype("<u4")

DTOK_MAGIC = b"DTOK"
DTOK_VERSION = 1
_DTOK_HEADER = struct.Struct("<4sBIIQ")


class CatflowError(Exception):
    """Base class for errors raised by this package."""


class DomainError(CatflowError, ValueError):
    pass


class LoadError(CatflowError):
    pass


class ConfigError(CatflowError, ValueError):
    pass


# ---------------------------------------------------------------------------
# scheduler

SCHEDULER_KINDS = ("linear", "polynomial", "cosine")


@dataclass(frozen=True)
class Scheduler:
    """Monotone interpolation schedule kappa(t) with kappa(0)=0, kappa(1)=1.

    ``power`` is only used by the polynomial kind.
    """

    kind: str = "linear"
    power: float = 1.0

    def __post_init__(self):
        if self.kind not in SCHEDULER_KINDS:
            raise ConfigError(f"unknown scheduler kind {self.kind!r}")
        if self.kind == "polynomial" and not self.power > 0:
            raise ConfigError("polynomial scheduler needs power > 0")

    @property
    def code(self) -> int:
        return SCHEDULER_KINDS.index(self.kind)

    @classmethod
    def parse(cls, text: str) -> "Scheduler":
        """Build from ``linear``, ``cosine`` or ``polynomial:<p>``."""
        name, _, arg = text.partition(":")
        if name == "polynomial":
            return cls("polynomial", float(arg or 2.0))
        if arg:
            raise ConfigError(f"scheduler {name!r} takes no argument")
        return cls(name)

    def __str__(self):
        if self.kind == "polynomial":
            return f"polynomial:{self.power:g}"
        return self.kind


def _check_time(t: float) -> float:
    t = float(t)
    if not 0.0 <= t <= 1.0:
        raise DomainError(f"time {t} outside [0, 1]")
    return t


def kappa(s: Scheduler, t: float) -> float:
    t = _check_time(t)
    if t == 0.0 or t == 1.0:
        return t
    if s.kind == "linear":
        return t
    if s.kind == "polynomial":
        return t**s.power
    return 0.5 * (1.0 - math.cos(math.pi * t))


def kappa_dot(s: Scheduler, t: float) -> float:
    t = _check_time(t)
    if s.kind == "linear":
        return 1.0
    if s.kind == "polynomial":
        if t == 0.0:
            # p < 1 diverges at 0; report +inf rather than raising
            return 0.0 if s.power > 1 else (1.0 if s.power == 1 else math.inf)
        return s.power * t ** (s.power - 1.0)
    return 0.5 * math.pi * math.sin(math.pi * t)


# ---------------------------------------------------------------------------
# time grid


@dataclass(frozen=True)
class TimeGrid:
    steps: int
    direction: str = "forward"

    def __post_init__(self):
        if self.steps < 1:
            raise ConfigError(f"step count must be >= 1, got {self.steps}")
        if self.direction not in ("forward", "backward"):
            raise ConfigError(f"bad direction {self.direction!r}")

    @property
    def h(self) -> float:
        return 1.0 / self.steps

    @property
    def nodes(self) -> np.ndarray:
        k = np.arange(self.steps + 1, dtype=np.float64)
        t = k / self.steps
        if self.direction == "backward":
            t = 1.0 - t
            t[-1] = 0.0
        else:
            t[-1] = 1.0
        return t


# ---------------------------------------------------------------------------
# seeds


@dataclass(frozen=True)
class SeedSpec:
    """Master seed from which independent per-row random streams derive.

    The stream for ``(purpose, index)`` depends only on those values and the
    master seed, so results do not depend on scheduling or worker count.
    """

    master: int = 0

    def __post_init__(self):
        if not 0 <= int(self.master) < 2**64:
            raise ConfigError("master seed must fit in 64 unsigned bits")

    def sequence(self, index: int, purpose: int = 0) -> np.random.SeedSequence:
        return np.random.SeedSequence(int(self.master), spawn_key=(int(purpose), int(index)))

    def stream(self, index: int, purpose: int = 0) -> np.random.Generator:
        return np.random.Generator(np.random.PCG64(self.sequence(index, purpose)))


# stream purposes
ROW_STREAM = 0
PARTITION_STREAM = 1
SAMPLE_STREAM = 2
ANCHOR_STREAM = 3


# ---------------------------------------------------------------------------
# datasets


def compact_dtype(K: int) -> np.dtype:
    """Smallest unsigned dtype holding tokens ``0..K-1``."""
    if K <= 2**8:
        return np.dtype(np.uint8)
    if K <= 2**16:
        return np.dtype(np.uint16)
    return np.dtype(np.uint32)


def as_tokens(seq, K: int, N: int | None = None) -> np.ndarray:
    """Validate a token sequence and return it as a uint32 array."""
    arr = np.asarray(seq)
    if arr.ndim != 1 or arr.size < 1:
        raise DomainError("token sequence must be a nonempty 1-d array")
    if N is not None and arr.size != N:
        raise DomainError(f"sequence length {arr.size} does not match N={N}")
    if np.any(arr < 0) or np.any(arr >= K):
        raise DomainError(f"token out of range for K={K}")
    return arr.astype(TOKEN_DTYPE)


@dataclass(frozen=True, eq=False)
class DatasetStore:
    """Immutable ``M x N`` token matrix over a vocabulary of size ``K``.

    Tokens are 0-based. Row order is load order and is what pair files
    index into.
    """

    rows: np.ndarray
    K: int
    _compact: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        rows = np.ascontiguousarray(self.rows)
        if rows.ndim != 2 or rows.shape[0] < 1 or rows.shape[1] < 1:
            raise LoadError(f"dataset must be a nonempty 2-d matrix, got shape {rows.shape}")
        if self.K < 2:
            raise LoadError(f"vocabulary size must be >= 2, got {self.K}")
        if rows.dtype.kind not in "ui":
            raise LoadError("dataset tokens must be integers")
        bad = np.flatnonzero(((rows < 0) | (rows >= self.K)).any(axis=1))
        if bad.size:
            raise LoadError(f"row {bad[0]}: token out of range for K={self.K}")
        rows = rows.astype(TOKEN_DTYPE)
        rows.setflags(write=False)
        compact = np.ascontiguousarray(rows, dtype=compact_dtype(self.K))
        compact.setflags(write=False)
        object.__setattr__(self, "rows", rows)
        object.__setattr__(self, "_compact", compact)

    @property
    def M(self) -> int:
        return self.rows.shape[0]

    @property
    def N(self) -> int:
        return self.rows.shape[1]

    @property
    def compact(self) -> np.ndarray:
        """Same matrix in the smallest dtype that fits ``K`` (used by kernels)."""
        return self._compact

    def __len__(self):
        return self.M

    def __repr__(self):
        return f"DatasetStore(N={self.N}, K={self.K}, M={self.M})"

    def check_seq(self, z) -> np.ndarray:
        return as_tokens(z, self.K, self.N)

    def take(self, indices) -> "DatasetStore":
        return DatasetStore(self.rows[np.asarray(indices)], self.K)


def write_tokens(path: PathLike, rows: np.ndarray, K: int) -> None:
    """Write a DTOK file. ``rows`` may have zero rows (e.g. empty sample runs)."""
    rows = np.asarray(rows)
    if rows.ndim != 2:
        raise DomainError("token matrix must be 2-d")
    M, N = rows.shape
    with open(path, "wb") as f:
        f.write(_DTOK_HEADER.pack(DTOK_MAGIC, DTOK_VERSION, N, K, M))
        f.write(np.ascontiguousarray(rows, dtype=TOKEN_DTYPE).tobytes())


def write_dataset(ds: DatasetStore, path: PathLike) -> None:
    write_tokens(path, ds.rows, ds.K)


def read_dtok_header(path: PathLike) -> tuple[int, int, int]:
    with open(path, "rb") as f:
        head = f.read(_DTOK_HEADER.size)
    return _parse_dtok_header(head)


def _parse_dtok_header(head: bytes) -> tuple[int, int, int]:
    if len(head) < _DTOK_HEADER.size:
        raise LoadError("truncated DTOK header")
    magic, version, N, K, M = _DTOK_HEADER.unpack(head[: _DTOK_HEADER.size])
    if magic != DTOK_MAGIC:
        raise LoadError(f"bad magic {magic!r}, expected {DTOK_MAGIC!r}")
    if version != DTOK_VERSION:
        raise LoadError(f"unsupported DTOK version {version}")
    if N < 1 or K < 2:
        raise LoadError(f"malformed header: N={N}, K={K}")
    return N, K, M


def _load_dtok(path: PathLike) -> DatasetStore:
    data = Path(path).read_bytes()
    N, K, M = _parse_dtok_header(data)
    body = memoryview(data)[_DTOK_HEADER.size:]
    expected = M * N * 4
    if len(body) != expected:
        complete = len(body) // (4 * N)
        raise LoadError(
            f"row {complete}: payload has {len(body)} bytes, expected {expected}"
        )
    if M < 1:
        raise LoadError("dataset has no rows")
    rows = np.frombuffer(body, dtype=TOKEN_DTYPE).reshape(M, N)
    return DatasetStore(rows, K)


def _load_csv(path: PathLike, K: int) -> DatasetStore:
    rows = []
    with open(path, newline="") as f:
        for lineno, rec in enumerate(csv.reader(f)):
            if not rec or all(not c.strip() for c in rec):
                continue
            r = len(rows)
            try:
                vals = [int(c) for c in rec]
            except ValueError:
                raise LoadError(f"row {r}: non-integer token on line {lineno + 1}") from None
            if rows and len(vals) != len(rows[0]):
                raise LoadError(
                    f"row {r}: has {len(vals)} tokens, expected {len(rows[0])}"
                )
            for v in vals:
                if not 0 <= v < K:
                    raise LoadError(f"row {r}: token {v} out of range for K={K}")
            rows.append(vals)
    if not rows:
        raise LoadError("dataset has no rows")
    return DatasetStore(np.array(rows, dtype=TOKEN_DTYPE), K)


def load_dataset(source: PathLike, format: str | None = None, K: int | None = None) -> DatasetStore:
    """Load a token dataset from a DTOK binary file or a CSV file.

    CSV needs ``K``. When ``format`` is omitted it is inferred from the
    file extension (``.csv`` means CSV, anything else DTOK).
    """
    path = Path(source)
    if format is None:
        format = "csv" if path.suffix.lower() == ".csv" else "binary-token"
    if format in ("binary-token", "dtok"):
        ds = _load_dtok(path)
        if K is not None and K != ds.K:
            raise LoadError(f"file declares K={ds.K}, caller expected K={K}")
        return ds
    if format == "csv":
        if K is None:
            raise LoadError("CSV datasets need an explicit vocabulary size K")
        return _load_csv(path, K)
    raise LoadError(f"unknown dataset format {format!r}")


def write_csv(rows: np.ndarray, path: PathLike) -> None:
    with open(path, "w", newline="") as f:
        w = csv.writer(f)
        for row in np.asarray(rows):
            w.writerow(int(v) for v in row)


def rows_as_bytes(rows: np.ndarray) -> Iterable[bytes]:
    """Hashable per-row keys for exact-match set operations."""
    rows = np.ascontiguousarray(rows, dtype=TOKEN_DTYPE)
    return (r.tobytes() for r in rows)
