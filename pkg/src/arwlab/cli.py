"""Command line entry point: ``arwlab {lattice,sample,verify,experiment,report}``.

Exit codes: 0 success, 1 failed verification or bad input data, 2 usage error.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys
from pathlib import Path

import numpy as np

from .errors import ArwError, SchemaMismatch
from .harness import ExperimentConfig, run_experiment, summarize_csv, summary_json
from .lattice import enumerate_frequencies, mu_hat_4_exact, spectral_correlations
from .sampler import PLANES, auto_resolution, draw_coefficients, evaluate_on_grid

EXIT_OK, EXIT_FAIL, EXIT_USAGE = 0, 1, 2


def _seed(args) -> int:
    env = os.environ.get("ARW_SEED")
    if env is not None and env != "":
        return int(env, 0)
    return args.seed


def _emit(text: str, out):
    if out:
        Path(out).write_text(text)
    else:
        sys.stdout.write(text)


def cmd_lattice(args) -> int:
    fs = enumerate_frequencies(args.n)
    mu = mu_hat_4_exact(fs)
    doc = {
        "n": fs.n,
        "N_n": fs.multiplicity,
        "mu4": {"rational": f"{mu.numerator}/{mu.denominator}", "decimal": float(mu)},
        "points": [list(p) for p in fs.points],
        "half_set": [list(p) for p in fs.half_set],
        "S3": spectral_correlations(fs, 3),
        "S4": spectral_correlations(fs, 4),
    }
    _emit(json.dumps(doc, indent=2) + "\n", args.out)
    return EXIT_OK


def cmd_sample(args) -> int:
    if not args.out:
        raise _Usage("sample needs --out PATH for the binary planes")
    fs = enumerate_frequencies(args.n)
    M = args.grid or auto_resolution(fs.n)
    seed = _seed(args)
    g = evaluate_on_grid(draw_coefficients(fs, seed), M)
    out = Path(args.out)
    g.planes().astype("<f8").tofile(out)
    header = {
        "n": fs.n,
        "M": M,
        "seed": seed,
        "plane_order": list(PLANES),
        "dtype": "float64 little-endian",
        "layout": "planes x rows (x1 index) x columns (x2 index), row-major",
    }
    Path(str(out) + ".json").write_text(json.dumps(header, indent=2) + "\n")
    print(f"wrote {len(PLANES)} planes of {M}x{M} to {out}")
    return EXIT_OK


def cmd_verify(args) -> int:
    from .verification import run_checks

    results = run_checks(args.n, args.tol, seed=_seed(args))
    width = max(len(r.name) for r in results)
    print(f"{'check':<{width}}  {'computed':>22}  {'expected':>22}  {'abs error':>10}  {'tol':>8}  status")
    failed = 0
    for r in results:
        status = "skip" if r.skipped else ("ok" if r.passed else "FAIL")
        failed += (not r.passed) and not r.skipped
        print(f"{r.name:<{width}}  {r.computed:>22.15g}  {r.expected:>22.15g}  {r.abs_error:>10.3g}  {r.tol:>8.1g}  {status}")
    print(f"{len(results) - failed} of {len(results)} checks passed" if not failed else f"{failed} check(s) FAILED")
    return EXIT_FAIL if failed else EXIT_OK


def _experiment_config(args) -> ExperimentConfig:
    base = {}
    if args.config:
        base = json.loads(Path(args.config).read_text())
    overrides = {
        "n": args.n,
        "levels": args.u,
        "replicates": args.replicates,
        "resolution": args.grid,
        "base_seed": args.seed,
        "workers": args.workers,
    }
    base.update({k: v for k, v in overrides.items() if v is not None})
    if os.environ.get("ARW_SEED"):
        base["base_seed"] = int(os.environ["ARW_SEED"], 0)
    base.setdefault("base_seed", 0)
    for key in ("n", "levels", "replicates"):
        if key not in base:
            raise _Usage(f"experiment needs --{'u' if key == 'levels' else key} (or a config file providing it)")
    try:
        return ExperimentConfig.from_dict(base)
    except (TypeError, ValueError) as exc:
        raise _Usage(str(exc)) from None


def _verdict(summary: dict) -> bool:
    if summary["replicates"] == 0:
        return False
    checks = [c["mean_within_3se"] for c in summary["cells"] if not c["degenerate_level"]]
    return all(v is not False for v in checks)


def cmd_experiment(args) -> int:
    cfg = _experiment_config(args)
    report = run_experiment(cfg, args.out)
    if args.out:
        print(f"wrote raw.csv, summary.json, metadata.json to {args.out}")
    else:
        sys.stdout.write(summary_json(report.summary))
    return EXIT_OK if _verdict(report.summary) else EXIT_FAIL


def cmd_report(args) -> int:
    text = Path(args.raw_csv).read_text()
    out = summarize_csv(text)
    _emit(out, args.out)
    return EXIT_OK if _verdict(json.loads(out)) else EXIT_FAIL


class _Usage(Exception):
    pass


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="arwlab", description="Arithmetic random wave laboratory")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("lattice", help="frequency set, mu4 and spectral correlation counts")
    s.add_argument("--n", type=int, required=True)
    s.add_argument("--out")
    s.set_defaults(func=cmd_lattice)

    s = sub.add_parser("sample", help="write one sampled field and its derivatives as raw float64 planes")
    s.add_argument("--n", type=int, required=True)
    s.add_argument("--grid", type=int, default=0)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--out")
    s.set_defaults(func=cmd_sample)

    s = sub.add_parser("verify", help="run the exact identity checks for one n")
    s.add_argument("--n", type=int, required=True)
    s.add_argument("--tol", type=float, default=1e-10)
    s.add_argument("--seed", type=int, default=0)
    s.set_defaults(func=cmd_verify)

    s = sub.add_parser("experiment", help="Monte Carlo run against the theory")
    s.add_argument("--n", type=int)
    s.add_argument("--u", type=float, action="append")
    s.add_argument("--replicates", type=int)
    s.add_argument("--grid", type=int)
    s.add_argument("--seed", type=int)
    s.add_argument("--workers", type=int)
    s.add_argument("--config")
    s.add_argument("--out")
    s.set_defaults(func=cmd_experiment)

    s = sub.add_parser("report", help="recompute summary.json from a raw CSV")
    s.add_argument("raw_csv")
    s.add_argument("--out")
    s.set_defaults(func=cmd_report)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code) if exc.code is not None else EXIT_OK
    try:
        return args.func(args)
    except _Usage as exc:
        parser.print_usage(sys.stderr)
        print(f"arwlab: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except SchemaMismatch as exc:
        print(f"arwlab: schema mismatch in column {exc.column!r}: {exc}", file=sys.stderr)
        return EXIT_FAIL
    except (ArwError, OSError) as exc:
        print(f"arwlab: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_FAIL


if __name__ == "__main__":
    sys.exit(main())
