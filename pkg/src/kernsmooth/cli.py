"""Command line front end: ``density``, ``regress`` and ``bench``.

Exit status is 0 on success, 2 when the input violates a precondition of
one of the pipeline stages, and 1 on I/O or parse errors.
"""

from __future__ import annotations

import argparse
import csv
import sys

import numpy as np

from . import bench as bench_mod
from .errors import PreconditionError
from .frame import interpolate
from .kernels import KernelKind
from .pipeline import relative_errors, run
from .sliding1d import STATUS_NAMES

EXIT_OK = 0
EXIT_IO = 1
EXIT_PRECONDITION = 2

_COLUMNS = {"kde": "density", "nw": "nw", "loclin": "loclin"}


class InputFormatError(Exception):
    """Malformed CSV input; the message carries the offending line number."""


def read_table(path, need_y: bool = False):
    """Read a ``x1..xd[,y]`` CSV file into ``(X, y or None)``."""
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = [h.strip() for h in next(reader)]
        except StopIteration:
            raise InputFormatError(f"{path}: line 1: empty file") from None
        has_y = bool(header) and header[-1] == "y"
        xcols = header[:-1] if has_y else header
        expected = [f"x{k + 1}" for k in range(len(xcols))]
        if not xcols or xcols != expected:
            raise InputFormatError(f"{path}: line 1: header must be x1..xd[,y], got {','.join(header)}")
        if need_y and not has_y:
            raise InputFormatError(f"{path}: line 1: a y column is required")
        rows = []
        for row in reader:
            if not row or all(not c.strip() for c in row):
                continue
            if len(row) != len(header):
                raise InputFormatError(f"{path}: line {reader.line_num}: expected {len(header)} fields, got {len(row)}")
            try:
                rows.append([float(c) for c in row])
            except ValueError:
                raise InputFormatError(f"{path}: line {reader.line_num}: not a number in {row!r}") from None
    if not rows:
        raise InputFormatError(f"{path}: no data rows")
    data = np.array(rows, dtype=float)
    if not np.all(np.isfinite(data)):
        raise InputFormatError(f"{path}: non-finite values are not supported")
    d = len(xcols)
    return data[:, :d], (data[:, d] if has_y else None)


def write_table(path, header, columns):
    """Write columns as CSV with shortest round-trip float formatting."""
    cols = [np.asarray(c) for c in columns]
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in zip(*cols):
            w.writerow([repr(float(v)) if isinstance(v, (float, np.floating)) else v for v in row])


def _parse_list(text, cast=int):
    return [cast(t) for t in str(text).split(",") if t.strip()]


def _estimators(args, default):
    names = _parse_list(args.estimator, str) if args.estimator else list(default)
    for e in names:
        if e not in _COLUMNS:
            raise ValueError(f"unknown estimator {e!r}; choose from kde, nw, loclin")
    return tuple(names)


def _smooth(args, estimators):
    x, y = read_table(args.input, need_y=any(e != "kde" for e in estimators))
    if not 0.0 < args.bandwidth_fraction <= 1.0:
        raise PreconditionError("--bandwidth-fraction must lie in (0, 1]")
    res = run(
        x,
        y,
        p=args.bandwidth_fraction,
        grid_size=args.grid_size,
        rotate=args.rotate == "on",
        policy="compensated" if args.stable_sum == "on" else "plain",
        kernel=args.kernel,
        estimators=estimators,
        engine=args.engine,
    )
    d = x.shape[1]
    if args.query:
        qx, _ = read_table(args.query)
        if qx.shape[1] != d:
            raise InputFormatError(f"{args.query}: expected {d} coordinates per row")
        coords = qx
        rq = res.setup.frame.transform(qx)

        def values(r, name):
            return interpolate(res.setup.grid, getattr(r, name), rq)

        status = None
    else:
        coords = res.points

        def values(r, name):
            return getattr(r, name)

        main = res.fast if res.fast is not None else res.naive
        status = [STATUS_NAMES[int(s)] for s in main.status]

    header = [f"x{k + 1}" for k in range(d)]
    cols = [coords[:, k] for k in range(d)]
    for e in estimators:
        name = _COLUMNS[e]
        if args.engine == "both":
            f, r = values(res.fast, name), values(res.naive, name)
            with np.errstate(divide="ignore", invalid="ignore"):
                rel = np.abs(f - r) / np.abs(r)
            header += [f"{name}_fast", f"{name}_naive", f"{name}_relerr"]
            cols += [f, r, rel]
        else:
            header.append(name)
            cols.append(values(res.fast if res.fast is not None else res.naive, name))
    if status is not None:
        header.append("status")
        cols.append(np.array(status, dtype=object))
    write_table(args.output, header, cols)
    if args.engine == "both":
        err = relative_errors(res.fast, res.naive, estimators)
        print(f"fast {res.fast_seconds:.4f} s, naive {res.naive_seconds:.4f} s, worst relative error {err.max(initial=0.0):.3E}")
    return EXIT_OK


def cmd_density(args):
    return _smooth(args, ("kde",))


def cmd_regress(args):
    return _smooth(args, _estimators(args, ("nw", "loclin")))


def cmd_bench(args):
    estimators = _estimators(args, ("kde", "nw", "loclin"))
    report = bench_mod.run_bench(
        dims=_parse_list(args.dims),
        sizes=_parse_list(args.bench_sizes),
        p=args.bandwidth_fraction,
        seed=args.seed,
        estimators=estimators,
        engine=args.engine,
    )
    text = report.to_csv() if args.report == "csv" else report.to_text()
    if args.output:
        with open(args.output, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    return EXIT_OK


def _kernel_name(text):
    try:
        return KernelKind.parse(text).value
    except ValueError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from None


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="kernsmooth", description="Fast kernel smoothing on rectilinear grids.")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, io_required=True):
        p.add_argument("--input", required=io_required, help="CSV with header x1..xd[,y]")
        p.add_argument("--output", required=io_required, help="output CSV path")
        p.add_argument("--bandwidth-fraction", type=float, default=0.15, help="fraction p of points per window")
        p.add_argument("--stable-sum", choices=("on", "off"), default="off", help="compensated running sums")
        p.add_argument("--engine", choices=("fast", "naive", "both"), default="fast")
        p.add_argument("--estimator", default=None, help="comma list of kde, nw, loclin")

    for name, fn, help_ in (
        ("density", cmd_density, "kernel density estimate on the grid"),
        ("regress", cmd_regress, "Nadaraya-Watson / locally linear regression on the grid"),
    ):
        p = sub.add_parser(name, help=help_)
        common(p)
        p.add_argument("--query", default=None, help="CSV of query points x1..xd; grid values are interpolated")
        p.add_argument("--kernel", default="epanechnikov", type=_kernel_name)
        p.add_argument("--grid-size", type=int, default=None, help="target number of grid nodes (default N)")
        p.add_argument("--rotate", choices=("on", "off"), default="on")
        p.set_defaults(func=fn)

    p = sub.add_parser("bench", help="time fast vs naive on simulated Gaussian data")
    common(p, io_required=False)
    p.set_defaults(engine="both")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--bench-sizes", default="20000")
    p.add_argument("--dims", default="1")
    p.add_argument("--report", choices=("text", "csv"), default="text")
    p.set_defaults(func=cmd_bench)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except PreconditionError as exc:
        print(f"error [{exc.module}]: {exc}", file=sys.stderr)
        return EXIT_PRECONDITION
    except (OSError, InputFormatError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_PRECONDITION


if __name__ == "__main__":
    sys.exit(main())
