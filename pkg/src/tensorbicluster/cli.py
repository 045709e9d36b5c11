"""Command-line interface: generate, solve, eval, sweep, spectrum, ingest.

Machine-readable outputs go to files, human summaries to stdout, diagnostics
to stderr.  Exit codes: 0 success, 2 argument error, 3 I/O or parse error,
4 numerical error.
"""

from __future__ import annotations

import argparse
import sys

import numpy as np

from .bicluster import (
    BiclusterSet,
    auto_biclusters,
    multiple_biclusters,
    recursive_biclusters,
    single_biclusters,
)
from .evaluation import correlation_report, write_correlation_csv
from .ingest import IngestError, ingest_long_csv
from .spectral import (
    DEFAULT_GAP_THETA,
    JacobiConvergenceError,
    eigen_sym,
    estimate_rank_by_gap,
    fold_covariance_cols,
    fold_covariance_rows,
)
from .synthetic import (
    SyntheticSpec,
    generate,
    load_truth,
    noise_sigma,
    recovery_rate,
    save_truth,
    sweep_sigma,
    write_sweep_csv,
)
from .tensor import TnsFormatError, atomic_write_text, read_tns, write_tns

__all__ = ["main"]

EXIT_OK = 0
EXIT_ARGUMENT = 2
EXIT_IO = 3
EXIT_NUMERICAL = 4


def parse_k_list(text: str) -> list[tuple[int, int]]:
    """Parse ``50:25,50:25``-style lists; a bare number means rows = cols."""
    pairs = []
    for part in text.split(","):
        part = part.strip()
        if not part:
            raise ValueError(f"empty entry in k list {text!r}")
        try:
            if ":" in part:
                a, b = part.split(":", 1)
                pairs.append((int(a), int(b)))
            else:
                v = int(part)
                pairs.append((v, v))
        except ValueError:
            raise ValueError(f"bad k entry {part!r}; expected an integer or rows:cols") from None
    return pairs


def _parse_float_list(text: str, flag: str) -> list[float]:
    try:
        values = [float(part) for part in text.split(",") if part.strip()]
    except ValueError:
        raise ValueError(f"{flag} expects comma-separated numbers, got {text!r}") from None
    if not values:
        raise ValueError(f"{flag} must list at least one value")
    return values


def _spec_from_args(args) -> SyntheticSpec:
    return SyntheticSpec(
        n1=args.n1,
        n2=args.n2,
        m=args.m,
        q=args.q,
        k=args.k,
        sigmas=tuple(args.sigma),
        noise_model=args.noise,
        seed=args.seed,
        random_v=args.random_v,
    )


def cmd_generate(args) -> int:
    spec = _spec_from_args(args)
    tensor, truth = generate(spec)
    write_tns(args.out_tensor, tensor)
    save_truth(args.out_truth, truth, spec)
    print(f"sigma_z={truth.sigma_z!r}")
    return EXIT_OK


def _solve_tensor(args) -> BiclusterSet:
    tensor = read_tns(args.input)
    if args.method == "single":
        pairs = parse_k_list(args.k)
        if len(pairs) != 1:
            raise ValueError("--method single takes exactly one k pair")
        return single_biclusters(tensor, *pairs[0])
    if args.method == "recursive":
        return recursive_biclusters(tensor, parse_k_list(args.k))
    if args.method == "multiple":
        return multiple_biclusters(tensor, parse_k_list(args.k))
    pairs = parse_k_list(args.k)
    if len(pairs) != 1:
        raise ValueError("--method auto takes exactly one k pair (reused per bicluster)")
    return auto_biclusters(tensor, *pairs[0], max_rank=args.max_rank, theta=args.theta)


def cmd_solve(args) -> int:
    result = _solve_tensor(args)
    atomic_write_text(args.out, result.to_json())
    for warning in result.warnings:
        print(f"warning: {warning}", file=sys.stderr)
    for b in result.biclusters:
        for warning in b.warnings:
            print(f"warning: bicluster {b.rank_position}: {warning}", file=sys.stderr)
    print(
        f"method={result.method} biclusters={len(result.biclusters)} "
        f"row_intersection={len(result.row_intersection)} "
        f"col_intersection={len(result.col_intersection)}"
    )
    return EXIT_OK


def cmd_eval(args) -> int:
    if args.truth is None and args.tensor is None:
        raise ValueError("eval needs --truth and/or --tensor")
    with open(args.result) as handle:
        found = BiclusterSet.from_json(handle.read())

    if args.truth is not None:
        truth, spec = load_truth(args.truth)
        rate = recovery_rate(found, truth, spec.k)
        print(f"recovery={rate!r}")

    if args.tensor is not None:
        if args.out_prefix is None:
            raise ValueError("--tensor evaluation needs --out-prefix for the correlation CSVs")
        tensor = read_tns(args.tensor)
        for i, b in enumerate(found.biclusters, start=1):
            report = correlation_report(tensor, b, centered=not args.raw_cosine)
            write_correlation_csv(f"{args.out_prefix}_bicluster{i}.csv", report)
            print(
                f"mean_abs_corr={report.mean_abs_corr!r} "
                f"n_traj={report.n_trajectories} "
                f"n_constant={len(report.constant_keys)} "
                f"bicluster={i}"
            )
        print(
            f"row_intersection={len(found.row_intersection)} "
            f"col_intersection={len(found.col_intersection)}"
        )
    return EXIT_OK


def cmd_sweep(args) -> int:
    base = SyntheticSpec(
        n1=args.n1,
        n2=args.n2,
        m=args.m,
        q=args.q,
        k=args.k,
        sigmas=tuple([1.0] * args.q),  # placeholder; the sweep derives per-point sigmas
        noise_model=args.noise,
        seed=args.seed,
        random_v=args.random_v,
    )
    points = sweep_sigma(base, args.sigma1_grid, args.reps, args.method)
    write_sweep_csv(args.out, points)
    for p in points:
        print(f"sigma1={p.sigma1!r} mean_recovery={p.mean_recovery!r}")
    return EXIT_OK


def cmd_spectrum(args) -> int:
    tensor = read_tns(args.input)
    lines = ["matrix,rank,eigenvalue"]
    ranks = []
    for name, fold in (("rows", fold_covariance_rows), ("cols", fold_covariance_cols)):
        cov = fold(tensor)
        pairs = eigen_sym(cov)
        top = min(args.top, pairs.values.size)
        for i in range(top):
            lines.append(f"{name},{i + 1},{pairs.values[i]!r}")
        ranks.append(estimate_rank_by_gap(pairs.values, args.max_rank, args.theta))
        if pairs.values[0] <= 1e-12 * max(1.0, float(np.trace(cov))):
            print(f"warning: degenerate {name} spectrum (top eigenvalue ~ 0)", file=sys.stderr)
    atomic_write_text(args.out, "\n".join(lines) + "\n")
    print(f"estimated_rank={min(ranks)}")
    return EXIT_OK


def cmd_ingest(args) -> int:
    result = ingest_long_csv(args.input, fill=args.fill)
    write_tns(args.out, result.tensor)
    t = result.tensor
    print(
        f"n1={t.n1} n2={t.n2} m={t.m} "
        f"filled={result.filled_cells} duplicates={result.duplicate_cells}"
    )
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="tensorbicluster",
        description="Extract biclusters from third-order tensors via covariance "
        "folding and spectral decomposition.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def add_spec_flags(p):
        p.add_argument("--n1", type=int, required=True, help="number of individuals")
        p.add_argument("--n2", type=int, required=True, help="number of features")
        p.add_argument("--m", type=int, required=True, help="number of time points")
        p.add_argument("--q", type=int, default=1, help="number of planted biclusters")
        p.add_argument("--k", type=int, required=True, help="planted cardinality per index set")
        p.add_argument("--noise", choices=("I", "II", "none"), default="II", help="noise model")
        p.add_argument("--seed", type=int, default=0, help="generator seed")
        p.add_argument(
            "--random-v",
            action="store_true",
            help="use a seeded random unit time profile instead of the constant one",
        )

    p = sub.add_parser("generate", help="write a synthetic planted tensor and its ground truth")
    add_spec_flags(p)
    p.add_argument("--sigma", type=lambda s: _parse_float_list(s, "--sigma"), required=True,
                   help="comma-separated signal strengths, one per bicluster, non-increasing")
    p.add_argument("--out-tensor", required=True, help="output .tns path")
    p.add_argument("--out-truth", required=True, help="output truth JSON path")
    p.set_defaults(func=cmd_generate)

    p = sub.add_parser("solve", help="extract biclusters from a .tns tensor")
    p.add_argument("--input", required=True, help="input .tns path")
    p.add_argument("--method", choices=("single", "recursive", "multiple", "auto"), required=True)
    p.add_argument("--k", required=True,
                   help="k list: comma-separated biclusters, rows:cols or a bare number each")
    p.add_argument("--theta", type=float, default=DEFAULT_GAP_THETA,
                   help="eigenvalue-gap ratio threshold (auto method)")
    p.add_argument("--max-rank", type=int, default=5,
                   help="largest bicluster count the gap estimate may return (auto method)")
    p.add_argument("--out", required=True, help="output bicluster JSON path")
    p.set_defaults(func=cmd_solve)

    p = sub.add_parser("eval", help="score a solve result against truth and/or the tensor")
    p.add_argument("--result", required=True, help="bicluster JSON from solve")
    p.add_argument("--truth", help="truth JSON from generate: prints the recovery rate")
    p.add_argument("--tensor", help=".tns path: writes per-bicluster correlation CSVs")
    p.add_argument("--out-prefix", help="prefix for correlation CSV files")
    p.add_argument("--raw-cosine", action="store_true",
                   help="uncentered cosine similarity instead of Pearson correlation")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("sweep", help="mean recovery rate over a signal-strength grid")
    add_spec_flags(p)
    p.add_argument("--sigma1-grid", type=lambda s: _parse_float_list(s, "--sigma1-grid"),
                   required=True, help="comma-separated sigma1 values")
    p.add_argument("--reps", type=int, default=10, help="repetitions per grid point")
    p.add_argument("--method", choices=("single", "recursive", "multiple"), default="multiple")
    p.add_argument("--out", required=True, help="output CSV path")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("spectrum", help="top eigenvalues of both folded covariance matrices")
    p.add_argument("--input", required=True, help="input .tns path")
    p.add_argument("--top", type=int, default=5, help="eigenvalues to write per matrix")
    p.add_argument("--theta", type=float, default=DEFAULT_GAP_THETA,
                   help="eigenvalue-gap ratio threshold")
    p.add_argument("--max-rank", type=int, default=5,
                   help="largest rank the gap estimate may return")
    p.add_argument("--out", required=True, help="output CSV path")
    p.set_defaults(func=cmd_spectrum)

    p = sub.add_parser("ingest", help="reshape a long-format CSV into a dense .tns tensor")
    p.add_argument("--input", required=True, help="CSV with dim1,dim2,dim3,value columns")
    p.add_argument("--fill", choices=("zero", "error", "mean"), default="zero",
                   help="policy for grid cells absent from the CSV")
    p.add_argument("--out", required=True, help="output .tns path")
    p.set_defaults(func=cmd_ingest)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ValueError, IndexError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ARGUMENT
    except (TnsFormatError, IngestError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO
    except JacobiConvergenceError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())
