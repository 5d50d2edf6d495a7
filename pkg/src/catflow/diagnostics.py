"""Coverage, pair statistics, total correlation and uniqueness/novelty counts."""

from __future__ import annotations

import json
import math
from collections import Counter
from dataclasses import asdict, dataclass, field
from typing import Callable, Optional

import numpy as np

from .core import ANCHOR_STREAM, ConfigError, DatasetStore, SeedSpec, rows_as_bytes
from .transport import PairSet, StepConfig, sample_many


def expected_coverage(M: int, k: int) -> float:
    """Expected fraction of M items hit by k uniform draws with replacement."""
    if M < 1 or k < 0:
        raise ConfigError("need M >= 1 and k >= 0")
    return -math.expm1(k * math.log1p(-1.0 / M)) if M > 1 else float(k > 0)


def coverage_stderr(M: int, k: int) -> float:
    """Standard error of the unique fraction under uniform draws with replacement."""
    a = (1.0 - 1.0 / M) ** k
    b = (1.0 - 2.0 / M) ** k if M > 1 else 0.0
    var_count = M * a + M * (M - 1) * b - (M * a) ** 2
    return math.sqrt(max(var_count, 0.0)) / M


@dataclass
class CoverageReport:
    M: int
    k: int
    unique_count: int
    empirical_cov: float
    predicted_cov: float

    def to_dict(self):
        return asdict(self)


def coverage_of(samples: np.ndarray, ds: DatasetStore) -> CoverageReport:
    """Coverage of ``ds`` by a batch of samples (exact row matches)."""
    rows = set(rows_as_bytes(ds.rows))
    hit = {key for key in rows_as_bytes(samples) if key in rows}
    k = len(samples)
    return CoverageReport(
        M=ds.M,
        k=k,
        unique_count=len(hit),
        empirical_cov=len(hit) / ds.M,
        predicted_cov=expected_coverage(ds.M, k),
    )


def empirical_coverage(ds: DatasetStore, k: int, cfg: StepConfig, s, seeds: SeedSpec,
                       threads: Optional[int] = None) -> CoverageReport:
    """Draw ``k`` forward samples and count the distinct dataset rows they reach."""
    samples = sample_many(ds, k, cfg, s, seeds, threads=threads)
    return coverage_of(samples, ds)


@dataclass
class PairStats:
    mean: float
    std: float
    histogram: np.ndarray
    baseline: float

    def to_dict(self):
        return {
            "mean": self.mean,
            "std": self.std,
            "baseline": self.baseline,
            "histogram": self.histogram.tolist(),
        }


def pair_hamming_stats(ps: PairSet) -> PairStats:
    """Hamming statistics of the pairs against the independent-pairing mean N(1 - 1/K)."""
    if ps.M == 0:
        raise ConfigError("empty pair set")
    d = np.count_nonzero(ps.x0 != ps.x1, axis=1)
    return PairStats(
        mean=float(d.mean()),
        std=float(d.std()),
        histogram=np.bincount(d, minlength=ps.N + 1),
        baseline=ps.N * (1.0 - 1.0 / ps.K),
    )


# ---------------------------------------------------------------------------
# total correlation


def plugin_entropy(counts) -> float:
    c = np.asarray(list(counts), dtype=np.float64)
    p = c[c > 0] / c.sum()
    return float(-(p * np.log(p)).sum())


def tc_plugin(samples: np.ndarray) -> float:
    """Plug-in total correlation (nats) of the empirical distribution of ``samples``.

    Sum of per-position marginal entropies minus the joint entropy, where the
    joint is taken over exact sequence equality.
    """
    samples = np.asarray(samples)
    marg = sum(plugin_entropy(np.unique(col, return_counts=True)[1]) for col in samples.T)
    joint = plugin_entropy(Counter(rows_as_bytes(samples)).values())
    # empirical TC is a KL divergence; clip float noise
    return max(marg - joint, 0.0)


@dataclass
class TCReport:
    anchors: int
    replicates: int
    per_anchor: np.ndarray
    mean: float
    stderr: float
    note: str = field(
        default="plug-in entropy estimates; positively biased by roughly "
        "(joint support - 1 - sum of marginal supports + N) / (2 R) nats"
    )

    def to_dict(self):
        d = asdict(self)
        d["per_anchor"] = self.per_anchor.tolist()
        return d


Sampler = Callable[[np.ndarray, np.random.Generator], np.ndarray]


def total_correlation(sampler: Sampler, N: int, K: int, anchors: int, replicates: int,
                      seeds: SeedSpec) -> TCReport:
    """Estimate the conditional total correlation of a sampler.

    For each of ``anchors`` uniform initial states, ``sampler(x0, rng)`` is
    run ``replicates`` times with different random streams and the plug-in TC
    of the terminal samples is recorded.
    """
    if replicates < 2:
        raise ConfigError("need at least 2 replicates per anchor")
    if anchors < 1:
        raise ConfigError("need at least one anchor")
    vals = np.empty(anchors)
    for a in range(anchors):
        x0 = seeds.stream(a, ANCHOR_STREAM).integers(0, K, N)
        outs = np.stack([
            np.asarray(sampler(x0.copy(), seeds.stream(a * replicates + r, ANCHOR_STREAM + 1)))
            for r in range(replicates)
        ])
        vals[a] = tc_plugin(outs)
    se = float(vals.std(ddof=1) / math.sqrt(anchors)) if anchors > 1 else 0.0
    return TCReport(anchors, replicates, vals, float(vals.mean()), se)


def factorized_sampler(probs: np.ndarray) -> Sampler:
    """Reference sampler drawing every position independently from ``probs[i]``."""
    probs = np.asarray(probs, dtype=np.float64)

    def run(x0, rng):
        u = rng.random(len(probs))
        idx = (u[:, None] >= np.cumsum(probs, axis=1)).sum(axis=1)
        return np.minimum(idx, probs.shape[1] - 1)

    return run


def coupled_sampler(N: int) -> Sampler:
    """Reference sampler whose positions all copy one fair coin."""

    def run(x0, rng):
        return np.full(N, rng.integers(0, 2))

    return run


# ---------------------------------------------------------------------------
# uniqueness / novelty


@dataclass
class UniquenessReport:
    count: int
    unique: int
    novel: int

    def to_dict(self):
        return asdict(self)


def uniqueness_novelty(samples, ds: DatasetStore) -> UniquenessReport:
    """Exact-match counts: distinct samples, and distinct samples absent from ``ds``."""
    samples = np.asarray(samples)
    if samples.ndim != 2 or samples.shape[1] != ds.N:
        raise ConfigError(f"samples must have shape (n, {ds.N})")
    distinct = set(rows_as_bytes(samples))
    known = set(rows_as_bytes(ds.rows))
    return UniquenessReport(len(samples), len(distinct), len(distinct - known))


# ---------------------------------------------------------------------------
# report rendering


def to_json(report) -> str:
    return json.dumps(report.to_dict(), indent=2, sort_keys=True)


def to_text(report) -> str:
    d = report.to_dict()
    width = max(len(k) for k in d)
    lines = []
    for k, v in d.items():
        if isinstance(v, float):
            v = f"{v:.6g}"
        elif isinstance(v, list) and len(v) > 8:
            v = "[" + ", ".join(f"{x:.4g}" if isinstance(x, float) else str(x) for x in v[:8]) + ", ...]"
        lines.append(f"{k:<{width}}  {v}")
    return "\n".join(lines)


def histogram_csv(stats: PairStats, path) -> None:
    with open(path, "w") as f:
        f.write("hamming,count\n")
        for h, c in enumerate(stats.histogram):
            f.write(f"{h},{int(c)}\n")
