"""Command-line surface: data generation, CI testing, truth-function export,
and the log-normal convolution demo.

All randomness flows from --seed; two identical invocations produce
byte-identical outputs.  Exit codes: 0 success, 1 composite e-value below a
user-supplied --threshold, 2 usage or input errors.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .convolution import (
    composite_evalue,
    condense_horizontal,
    condense_vertical,
    convolve,
    lognormal_reference,
)
from .errors import FbstCiError
from .fbst import CiTestSpec, run_ci_test, run_ci_test_from_tables
from .tables import ContingencyTable, emit_csv, ingest_csv, load_cpt_model, sample_dataset
from .truthfn import (
    AXIS_BOTH,
    AXIS_HORIZONTAL,
    AXIS_VERTICAL,
    elementary_evalue,
    read_truth_tsv,
    write_truth_tsv,
)

_MODE_FLAGS = {"h": AXIS_HORIZONTAL, "v": AXIS_VERTICAL, "both": AXIS_BOTH}


def _write_text(path: str | None, text: str) -> None:
    if path is None or path == "-":
        sys.stdout.write(text)
    else:
        Path(path).write_text(text, encoding="utf-8")


def _load_count_grid(path: str) -> np.ndarray:
    """One contingency table as a headerless CSV of integer rows."""
    rows = []
    for line_no, line in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), start=1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        try:
            rows.append([int(cell) for cell in line.split(",")])
        except ValueError:
            raise FbstCiError(f"{path}: line {line_no}: expected comma-separated integers") from None
    if not rows:
        raise FbstCiError(f"{path}: no count rows")
    widths = {len(r) for r in rows}
    if len(widths) > 1:
        raise FbstCiError(f"{path}: rows have differing lengths {sorted(widths)}")
    return np.array(rows, dtype=np.int64)


def _emit_truth(run, directory: str) -> None:
    out = Path(directory)
    out.mkdir(parents=True, exist_ok=True)
    for slice_truth in run.truth_functions:
        for mode, tf in (("h", slice_truth.horizontal), ("v", slice_truth.vertical)):
            if tf is not None:
                write_truth_tsv(tf, out / f"truth_x{slice_truth.label}_{mode}.tsv")


def _threshold_exit(report, threshold: float | None) -> int:
    if threshold is None:
        return 0
    if report.composite_vertical is not None:
        value = report.composite_vertical
    else:
        lo, hi = report.composite_horizontal
        value = 0.5 * (lo + hi)
    return 0 if value >= threshold else 1


def _cmd_gen(args) -> int:
    model = load_cpt_model(args.cpt)
    dataset = sample_dataset(model, args.n, args.seed)
    if args.out is None or args.out == "-":
        emit_csv(dataset, sys.stdout)
    else:
        with open(args.out, "w", encoding="utf-8", newline="") as fh:
            emit_csv(dataset, fh)
    return 0


def _spec_from_args(args) -> CiTestSpec:
    return CiTestSpec(
        seed=args.seed,
        alpha=args.alpha,
        n_samples=args.samples,
        n_bins=args.bins,
        axis_mode=_MODE_FLAGS[args.mode],
        y_column=getattr(args, "y", "Y"),
        z_column=getattr(args, "z", "Z"),
        x_column=getattr(args, "given", "X"),
    )


def _cmd_test(args) -> int:
    dataset = ingest_csv(args.data, x_column=args.given, y_column=args.y, z_column=args.z)
    run = run_ci_test(dataset, _spec_from_args(args))
    _write_text(args.out, run.report.to_json())
    if args.emit_truth:
        _emit_truth(run, args.emit_truth)
    return _threshold_exit(run.report, args.threshold)


def _cmd_test_tables(args) -> int:
    tables = [ContingencyTable(_load_count_grid(path), slice_label=i + 1)
              for i, path in enumerate(args.tables)]
    run = run_ci_test_from_tables(tables, _spec_from_args(args))
    _write_text(args.out, run.report.to_json())
    if args.emit_truth:
        _emit_truth(run, args.emit_truth)
    return _threshold_exit(run.report, args.threshold)


def _cmd_demo_lognormal(args) -> int:
    mode = _MODE_FLAGS[args.mode]
    wa = lognormal_reference(args.mu1, args.sigma1, args.bins, mode)
    wb = lognormal_reference(args.mu2, args.sigma2, args.bins, mode)
    raw = convolve(wa, wb)
    condense = condense_horizontal if mode == AXIS_HORIZONTAL else condense_vertical
    tf = condense(raw, args.bins)
    from scipy.stats import norm
    mu = args.mu1 + args.mu2
    sigma = float(np.hypot(args.sigma1, args.sigma2))
    lines = ["# log_f_left\tlog_f_right\tmass\tcdf_lower\tcdf_upper"
             "\tanalytic_cdf_left\tanalytic_cdf_right"]
    for (left, right, mass, lower, upper), al, ar in zip(
            tf.bins(), norm.cdf((tf.log_f_left - mu) / sigma), norm.cdf((tf.log_f_right - mu) / sigma)):
        values = (left, right, mass, lower, upper, al, ar)
        lines.append("\t".join(repr(float(v)) for v in values))
    _write_text(args.out, "\n".join(lines) + "\n")
    return 0


def _cmd_truth(args) -> int:
    tf = read_truth_tsv(args.tsv, axis_mode=_MODE_FLAGS[args.mode])
    lo, hi = elementary_evalue(tf, args.at)
    sys.stdout.write(f"{lo!r}\t{hi!r}\n")
    return 0


def _cmd_serve(args) -> int:
    import uvicorn

    from .service import app
    uvicorn.run(app, host=args.host, port=args.port)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="fbstci",
        description="Full Bayesian Significance Test for conditional independence "
                    "of discrete variables.",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    gen = sub.add_parser("gen", help="sample a synthetic dataset from a CPT model file")
    gen.add_argument("--cpt", required=True, help="CPT model JSON file")
    gen.add_argument("--n", type=int, required=True, help="number of records")
    gen.add_argument("--seed", type=int, required=True)
    gen.add_argument("--out", help="output CSV path (default: stdout)")
    gen.set_defaults(func=_cmd_gen)

    def add_test_options(p, with_columns: bool) -> None:
        if with_columns:
            p.add_argument("--data", required=True, help="input CSV path")
            p.add_argument("--y", required=True, help="column holding Y")
            p.add_argument("--z", required=True, help="column holding Z")
            p.add_argument("--given", required=True, help="conditioning column X")
        p.add_argument("--alpha", type=float, default=1.0, help="prior hyperparameter (default 1)")
        p.add_argument("--samples", type=int, default=1_000_000,
                       help="Monte Carlo draws per slice (default 1000000)")
        p.add_argument("--bins", type=int, default=100, help="bin budget (default 100)")
        p.add_argument("--mode", choices=sorted(_MODE_FLAGS), default="both",
                       help="discretization axis (default both)")
        p.add_argument("--seed", type=int, required=True)
        p.add_argument("--out", help="report JSON path (default: stdout)")
        p.add_argument("--emit-truth", metavar="DIR",
                       help="write per-slice truth-function TSVs into DIR")
        p.add_argument("--threshold", type=float,
                       help="exit 1 when the composite e-value falls below this")

    test = sub.add_parser("test", help="CI test on a CSV dataset")
    add_test_options(test, with_columns=True)
    test.set_defaults(func=_cmd_test)

    test_tables = sub.add_parser("test-tables",
                                 help="CI test on pre-aggregated count grids (one CSV per slice)")
    test_tables.add_argument("--tables", nargs="+", required=True, metavar="CSV",
                             help="count-grid files, one per conditioning value")
    add_test_options(test_tables, with_columns=False)
    test_tables.set_defaults(func=_cmd_test_tables)

    demo = sub.add_parser("demo-lognormal",
                          help="convolve two log-normal references and compare with the analytic law")
    demo.add_argument("--mu1", type=float, required=True)
    demo.add_argument("--sigma1", type=float, required=True)
    demo.add_argument("--mu2", type=float, required=True)
    demo.add_argument("--sigma2", type=float, required=True)
    demo.add_argument("--bins", type=int, default=100)
    demo.add_argument("--mode", choices=["h", "v"], default="h")
    demo.add_argument("--out", help="output TSV path (default: stdout)")
    demo.set_defaults(func=_cmd_demo_lognormal)

    truth = sub.add_parser("truth", help="evaluate an exported truth-function TSV at a threshold")
    truth.add_argument("--tsv", required=True, help="TSV produced by --emit-truth or demo-lognormal")
    truth.add_argument("--at", type=float, required=True, metavar="LOG_F",
                       help="log-density threshold to evaluate at")
    truth.add_argument("--mode", choices=["h", "v"], default="h")
    truth.set_defaults(func=_cmd_truth)

    serve = sub.add_parser("serve", help="run the HTTP service")
    serve.add_argument("--host", default="127.0.0.1")
    serve.add_argument("--port", type=int, default=8000)
    serve.set_defaults(func=_cmd_serve)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.command == "test" and len({args.y, args.z, args.given}) != 3:
        parser.error("--y, --z and --given must name three distinct columns")
    try:
        return args.func(args)
    except FbstCiError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
