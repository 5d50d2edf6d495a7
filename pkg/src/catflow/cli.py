"""Command-line interface.

Exit codes: 0 success, 1 usage/configuration error, 2 I/O or format error,
3 numeric error. Diagnostics go to stderr; with ``--json`` stdout carries
only the report.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import logging
import sys
import time
from pathlib import Path

import numpy as np

from . import continuous as cont
from . import diagnostics as diag
from .core import (
    CatflowError,
    ConfigError,
    DomainError,
    LoadError,
    Scheduler,
    SeedSpec,
    load_dataset,
    write_csv,
    write_tokens,
)
from .transport import (
    StepConfig,
    StepSizeError,
    default_threads,
    pairflow,
    read_pairs,
    sample_forward,
    sample_many,
    write_pairs,
)
from .velocity import SingularityError

logger = logging.getLogger("catflow")

EXIT_USAGE, EXIT_IO, EXIT_NUMERIC = 1, 2, 3


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _version() -> str:
    from . import __version__

    return __version__


def _digest(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as f:
        for chunk in iter(lambda: f.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def write_manifest(args, out: Path, inputs: list, started: float, notes=None) -> Path:
    flags = {k: v for k, v in vars(args).items() if k not in ("func",)}
    manifest = {
        "command": args.command,
        "flags": {k: (str(v) if isinstance(v, Path) else v) for k, v in flags.items()},
        "seed": getattr(args, "seed", None),
        "inputs": {str(p): _digest(p) for p in inputs},
        "version": _version(),
        "duration_s": round(time.time() - started, 3),
    }
    if notes:
        manifest["notes"] = notes
    path = Path(str(out) + ".manifest.json")
    path.write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    return path


def _emit(args, report):
    if args.json:
        print(diag.to_json(report) if hasattr(report, "to_dict") else json.dumps(report, indent=2))
    else:
        print(diag.to_text(report) if hasattr(report, "to_dict") else "\n".join(
            f"{k}  {v}" for k, v in report.items()))


def _load(args):
    return load_dataset(args.data, K=args.k)


def _step_config(args) -> StepConfig:
    return StepConfig(args.steps, getattr(args, "final", "sample"), not args.no_clamp)


# ---------------------------------------------------------------------------
# commands


def cmd_pair(args):
    t0 = time.time()
    ds = _load(args)
    s = Scheduler.parse(args.scheduler)
    ps = pairflow(ds, _step_config(args), s, SeedSpec(args.seed), subsets=args.subsets,
                  threads=args.threads)
    write_pairs(ps, args.out)
    write_manifest(args, args.out, [args.data], t0, {"scheduler": str(s)})
    stats = diag.pair_hamming_stats(ps)
    report = {"records": ps.M, "subsets": ps.subsets, "mean_hamming": stats.mean,
              "baseline": stats.baseline, "clamped": ps.extra.get("clamped", 0)}
    _emit(args, report)


def cmd_sample(args):
    t0 = time.time()
    ds = _load(args)
    if args.count < 0:
        raise ConfigError("--count must be >= 0")
    samples = sample_many(ds, args.count, _step_config(args), Scheduler.parse(args.scheduler),
                          SeedSpec(args.seed), threads=args.threads)
    if str(args.out).endswith(".csv"):
        write_csv(samples, args.out)
    else:
        write_tokens(args.out, samples, ds.K)
    write_manifest(args, args.out, [args.data], t0)
    u = diag.uniqueness_novelty(samples, ds) if args.count else diag.UniquenessReport(0, 0, 0)
    _emit(args, u)


def cmd_coverage(args):
    ds = _load(args)
    k = ds.M if args.draws is None else args.draws
    rep = diag.empirical_coverage(ds, k, _step_config(args), Scheduler.parse(args.scheduler),
                                  SeedSpec(args.seed), threads=args.threads)
    _emit(args, rep)


def cmd_tc(args):
    seeds = SeedSpec(args.seed)
    if args.sampler == "forward":
        if args.data is None:
            raise UsageError("--sampler forward needs --data")
        ds = _load(args)
        cfg, s = _step_config(args), Scheduler.parse(args.scheduler)
        N, K = ds.N, ds.K

        def sampler(x0, rng):
            return sample_forward(ds, cfg, s, rng, x0=x0)
    else:
        N, K = args.length, args.vocab
        if args.sampler == "factorized":
            sampler = diag.factorized_sampler(np.full((N, K), 1.0 / K))
        else:
            K = 2
            sampler = diag.coupled_sampler(N)
    rep = diag.total_correlation(sampler, N, K, args.anchors, args.replicates, seeds)
    _emit(args, rep)


def cmd_pairstats(args):
    ps = read_pairs(args.pairs)
    stats = diag.pair_hamming_stats(ps)
    if args.histogram_csv:
        diag.histogram_csv(stats, args.histogram_csv)
    _emit(args, stats)


def cmd_gen_moons(args):
    t0 = time.time()
    ps = cont.two_moons_nfold(args.folds, args.samples, args.noise, np.random.default_rng(args.seed))
    cont.save_points(ps, args.out)
    write_manifest(args, args.out, [], t0, {
        "moon_radius": cont.MOON_RADIUS, "moon_offset": list(cont.MOON_OFFSET)})
    _emit(args, {"D": ps.D, "M": ps.M, "out": str(args.out)})


def cmd_pair_continuous(args):
    t0 = time.time()
    data = cont.load_points(args.data)
    rng = np.random.default_rng(args.seed)
    x0 = rng.standard_normal((args.count, data.D))
    pairs = cont.integrate_forward(data, x0, args.steps, args.snap_tol)
    cont.save_points(cont.PointSet(np.hstack([pairs.x0, pairs.x1])), args.out)
    write_manifest(args, args.out, [args.data], t0, {"layout": "each row is [x0, x1]"})
    report = {"pairs": args.count, "snap_rate": pairs.snap_rate,
              "chamfer_sq_first_two": cont.chamfer(cont.PointSet(pairs.x1), data, True)}
    _emit(args, report)


def cmd_chamfer(args):
    a, b = cont.load_points(args.a), cont.load_points(args.b)
    report = {
        "chamfer_sq": cont.chamfer(a, b, args.first_two, squared=True),
        "chamfer": cont.chamfer(a, b, args.first_two, squared=False),
    }
    _emit(args, report)


def read_idx(path) -> np.ndarray:
    """Read an unsigned-byte IDX file (e.g. MNIST images) as ``(count, features)``."""
    data = Path(path).read_bytes()
    if len(data) < 4 or data[0] != 0 or data[1] != 0 or data[2] != 0x08:
        raise LoadError(f"{path}: bad IDX magic (expected unsigned-byte IDX, e.g. 0x00000803)")
    ndim = data[3]
    if ndim < 2:
        raise LoadError(f"{path}: IDX needs at least 2 dimensions, got {ndim}")
    head = 4 + 4 * ndim
    if len(data) < head:
        raise LoadError(f"{path}: truncated IDX header")
    dims = np.frombuffer(data, dtype=">u4", count=ndim, offset=4).astype(np.int64)
    count, feat = int(dims[0]), int(np.prod(dims[1:]))
    if feat >= 2**32 or count * feat != len(data) - head:
        raise LoadError(f"{path}: dimensions {dims.tolist()} overflow or do not match the payload")
    return np.frombuffer(data, dtype=np.uint8, offset=head).reshape(count, feat)


def cmd_convert(args):
    t0 = time.time()
    notes = {}
    if str(args.input).endswith(".csv"):
        if args.k is None:
            raise UsageError("CSV input needs --k")
        ds = load_dataset(args.input, "csv", K=args.k)
        rows, K = ds.rows, ds.K
    else:
        pix = read_idx(args.input)
        K = 2 if args.k is None else args.k
        if K == 2:
            rows = (pix >= args.threshold).astype(np.uint32)
        elif K == 256:
            rows = pix.astype(np.uint32)
        else:
            raise UsageError("IDX conversion supports --k 2 (binarize) or --k 256 (raw bytes)")
        if rows.shape[1] == 784:
            notes["N"] = "28x28 images give N=784; no pixels are cropped to reach 768"
    write_tokens(args.out, rows, K)
    write_manifest(args, args.out, [args.input], t0, notes)
    _emit(args, {"N": int(rows.shape[1]), "K": K, "M": int(rows.shape[0]), **notes})


def cmd_synth(args):
    """Synthetic token datasets used by the demos and tests."""
    from .synthetic import clustered, separated

    t0 = time.time()
    rng = np.random.default_rng(args.seed)
    if args.kind == "separated":
        rows = separated(args.rows, args.length, args.vocab, rng)
    elif args.kind == "clusters":
        rows = clustered(args.rows, args.length, args.vocab, rng, flip=args.flip)
    else:
        rows = rng.integers(0, args.vocab, (args.rows, args.length))
    write_tokens(args.out, rows, args.vocab)
    write_manifest(args, args.out, [], t0)
    _emit(args, {"N": args.length, "K": args.vocab, "M": args.rows})


# ---------------------------------------------------------------------------
# parser


def _add_data(p, required=True):
    p.add_argument("--data", type=Path, required=required, help="DTOK or CSV token dataset")
    p.add_argument("--k", type=int, default=None, help="vocabulary size (required for CSV)")


def _add_transport(p, steps):
    p.add_argument("--steps", type=int, default=steps)
    p.add_argument("--scheduler", default="linear", help="linear | cosine | polynomial:<p>")
    p.add_argument("--no-clamp", action="store_true", help="fail instead of clamping invalid steps")


def _add_common(p, threads=True):
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--json", action="store_true", help="print the report as JSON only")
    if threads:
        p.add_argument("--threads", type=int, default=None,
                       help="worker threads (default: $PAIRFLOW_THREADS or all cores)")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="catflow", description="Closed-form discrete flow pairing toolkit")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("pair", help="invert every dataset row into a (x0, x1) pair file")
    _add_data(p)
    _add_transport(p, 20)
    _add_common(p)
    p.add_argument("--subsets", type=int, default=1)
    p.add_argument("--out", type=Path, required=True)
    p.set_defaults(func=cmd_pair)

    p = sub.add_parser("sample", help="draw samples with the closed-form forward velocity")
    _add_data(p)
    _add_transport(p, 64)
    _add_common(p)
    p.add_argument("--count", type=int, default=1024)
    p.add_argument("--final", choices=("sample", "argmax"), default="sample")
    p.add_argument("--out", type=Path, required=True)
    p.set_defaults(func=cmd_sample)

    p = sub.add_parser("coverage", help="dataset coverage of forward samples")
    _add_data(p)
    _add_transport(p, 64)
    _add_common(p)
    p.add_argument("--draws", type=int, default=None, help="number of samples (default M)")
    p.add_argument("--final", choices=("sample", "argmax"), default="sample")
    p.set_defaults(func=cmd_coverage)

    p = sub.add_parser("tc", help="plug-in total correlation of a sampler")
    _add_data(p, required=False)
    _add_transport(p, 64)
    _add_common(p, threads=False)
    p.add_argument("--sampler", choices=("forward", "factorized", "coupled"), default="forward")
    p.add_argument("--anchors", type=int, default=20)
    p.add_argument("--replicates", type=int, default=10)
    p.add_argument("--length", type=int, default=4, help="N for reference samplers")
    p.add_argument("--vocab", type=int, default=2, help="K for the factorized sampler")
    p.set_defaults(func=cmd_tc)

    p = sub.add_parser("pairstats", help="Hamming statistics of a pair file")
    p.add_argument("--pairs", type=Path, required=True)
    p.add_argument("--histogram-csv", type=Path, default=None)
    p.add_argument("--json", action="store_true")
    p.set_defaults(func=cmd_pairstats)

    p = sub.add_parser("gen-moons", help="N-fold two-moons point set")
    p.add_argument("--folds", type=int, default=1)
    p.add_argument("--samples", type=int, default=50000)
    p.add_argument("--noise", type=float, default=cont.MOON_NOISE)
    p.add_argument("--out", type=Path, required=True)
    _add_common(p, threads=False)
    p.set_defaults(func=cmd_gen_moons)

    p = sub.add_parser("pair-continuous", help="Gaussian-to-data pairs via the closed-form velocity")
    p.add_argument("--data", type=Path, required=True, help="CPTS or CSV point set")
    p.add_argument("--count", type=int, default=5000)
    p.add_argument("--steps", type=int, default=256)
    p.add_argument("--snap-tol", type=float, default=cont.SNAP_TOL)
    p.add_argument("--out", type=Path, required=True)
    _add_common(p, threads=False)
    p.set_defaults(func=cmd_pair_continuous)

    p = sub.add_parser("chamfer", help="Chamfer distance between two point sets")
    p.add_argument("--a", type=Path, required=True)
    p.add_argument("--b", type=Path, required=True)
    p.add_argument("--first-two", action="store_true", help="use only coordinates 0 and 1")
    p.add_argument("--json", action="store_true")
    p.set_defaults(func=cmd_chamfer)

    p = sub.add_parser("convert", help="IDX images or CSV to a DTOK dataset")
    p.add_argument("--input", type=Path, required=True)
    p.add_argument("--out", type=Path, required=True)
    p.add_argument("--threshold", type=int, default=128, help="token 1 iff pixel >= threshold")
    p.add_argument("--k", type=int, default=None, help="2 (binarize, default) or 256 for IDX")
    p.add_argument("--json", action="store_true")
    p.set_defaults(func=cmd_convert)

    p = sub.add_parser("synth", help="write a synthetic token dataset")
    p.add_argument("--kind", choices=("separated", "clusters", "uniform"), default="separated")
    p.add_argument("--rows", type=int, default=2000)
    p.add_argument("--length", type=int, default=16)
    p.add_argument("--vocab", type=int, default=2)
    p.add_argument("--flip", type=float, default=0.1)
    p.add_argument("--out", type=Path, required=True)
    _add_common(p, threads=False)
    p.set_defaults(func=cmd_synth)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        stream=sys.stderr, format="%(levelname)s %(name)s: %(message)s")
    if getattr(args, "threads", None) is None and hasattr(args, "threads"):
        args.threads = default_threads()
    try:
        args.func(args)
    except (UsageError, ConfigError) as e:
        print(f"catflow {args.command}: {e}", file=sys.stderr)
        return EXIT_USAGE
    except (LoadError, OSError) as e:
        print(f"catflow {args.command}: {e}", file=sys.stderr)
        return EXIT_IO
    except (StepSizeError, SingularityError, DomainError, FloatingPointError) as e:
        print(f"catflow {args.command}: {e}", file=sys.stderr)
        return EXIT_NUMERIC
    except CatflowError as e:
        print(f"catflow {args.command}: {e}", file=sys.stderr)
        return EXIT_NUMERIC
    return 0


if __name__ == "__main__":
    sys.exit(main())
