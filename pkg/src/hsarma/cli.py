"""Command-line entry point: ``hsarma {simulate,fit,path,forecast,bench}``.

Exit status is 0 on success (a fit that hit its iteration cap still counts,
with ``converged: false`` in the JSON) and 2 for usage or data errors.
"""
from __future__ import annotations

import argparse
import json
import logging
import math
import sys
from pathlib import Path
from typing import List, Optional

import numpy as np

from .exceptions import FitError, SamplingError, SeriesLengthError, StabilityError
from .selection import (
    DEFAULT_LAMBDA0_GRID,
    PathFailure,
    PathSpec,
    bic,
    estimation_error,
    lambda_path,
    run_table1,
    select_bic,
)
from .series import ArmaParams, TimeSeries, forecast, read_series_csv, simulate, write_series_csv
from .solver import FitConfig, FitResult, fit
from .stability import DEFAULT_DELTA

DEFAULT_SEED = 0
EXIT_USAGE = 2


class UsageError(Exception):
    pass


def _floats(text: str) -> List[float]:
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None


def _pair(text: str):
    vals = text.split(",")
    if len(vals) != 2:
        raise argparse.ArgumentTypeError(f"expected p,q, got {text!r}")
    try:
        return int(vals[0]), int(vals[1])
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected integers p,q, got {text!r}") from None


def _add_caps(p: argparse.ArgumentParser, default: int = 5) -> None:
    p.add_argument("--pcap", type=int, default=default, help="AR lag cap")
    p.add_argument("--qcap", type=int, default=default, help="MA lag cap")
    p.add_argument("--delta", type=float, default=DEFAULT_DELTA, help="stability gap")
    p.add_argument("--max-outer", type=int, default=500)
    p.add_argument("--tol", type=float, default=1e-6)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="hsarma", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    s = sub.add_parser("simulate", help="simulate an ARMA series to CSV")
    s.add_argument("--phi", type=_floats, default=[])
    s.add_argument("--theta", type=_floats, default=[],
                   help="use --theta=-0.5,0.2 when the list starts with a minus sign")
    s.add_argument("--model", type=Path, help="JSON file with phi/theta lists")
    s.add_argument("--T", type=int, required=True)
    s.add_argument("--noise-sd", type=float, default=1.0)
    s.add_argument("--seed", type=int, default=DEFAULT_SEED)
    s.add_argument("-o", "--output", type=Path, required=True)

    f = sub.add_parser("fit", help="fit one penalty value")
    f.add_argument("input", type=Path, help="one-column CSV series")
    _add_caps(f)
    g = f.add_mutually_exclusive_group(required=True)
    g.add_argument("--lambda", dest="lam", type=float)
    g.add_argument("--lambda0", type=float, help="penalty scaled by sqrt(T)")
    f.add_argument("--truth", type=Path, help="JSON model for the err= summary")
    f.add_argument("-o", "--output", type=Path, required=True)

    p = sub.add_parser("path", help="fit a penalty grid and select by BIC")
    p.add_argument("input", type=Path)
    _add_caps(p)
    g = p.add_mutually_exclusive_group()
    g.add_argument("--lambda0", type=_floats)
    g.add_argument("--lambda", dest="lam", type=_floats,
                   help="lo,hi,count for a log-spaced absolute grid")
    p.add_argument("-o", "--output", type=Path, required=True)

    c = sub.add_parser("forecast", help="forecast from a fitted model")
    c.add_argument("input", type=Path, help="series CSV the model was fitted on")
    c.add_argument("--model", type=Path, required=True, help="FitResult or model JSON")
    c.add_argument("--horizon", type=int, default=20)
    c.add_argument("-o", "--output", type=Path, required=True)

    b = sub.add_parser("bench", help="simulation study over a lambda0 grid")
    b.add_argument("--models", type=_pair, action="append", required=True,
                   help="p,q (repeatable)")
    b.add_argument("--reps", type=int, default=20)
    b.add_argument("--T", type=int, default=4000)
    b.add_argument("--lambda0", type=_floats, default=list(DEFAULT_LAMBDA0_GRID))
    b.add_argument("--horizon", type=int, default=20)
    b.add_argument("--seed", type=int, default=DEFAULT_SEED)
    b.add_argument("--jobs", type=int, default=1)
    _add_caps(b, default=10)
    b.add_argument("-o", "--output", type=Path, required=True,
                   help="output stem; writes .json, .csv and .txt")
    return parser


def _load_model(path: Path) -> ArmaParams:
    d = json.loads(path.read_text())
    if "params" in d:
        d = d["params"]
    return ArmaParams.from_dict(d)


def _load_series(path: Path) -> TimeSeries:
    if not path.is_file():
        raise UsageError(f"input file not found: {path}")
    return read_series_csv(path)


def _fit_kwargs(args) -> dict:
    if args.pcap < 0 or args.qcap < 0 or args.pcap + args.qcap < 1:
        raise UsageError("--pcap and --qcap must be >= 0 with at least one positive")
    return dict(p_cap=args.pcap, q_cap=args.qcap, delta=args.delta,
                max_outer=args.max_outer, tol=args.tol)


def _result_json(res: FitResult, series: TimeSeries) -> dict:
    d = res.to_dict()
    d["mean"] = series.mean
    return d


def cmd_simulate(args) -> int:
    if args.model is not None:
        if args.phi or args.theta:
            raise UsageError("give either --model or --phi/--theta")
        params = _load_model(args.model)
    else:
        params = ArmaParams(args.phi, args.theta)
    if args.T < 1:
        raise UsageError("--T must be positive")
    ts = simulate(params, args.T, noise_sd=args.noise_sd, seed=args.seed)
    write_series_csv(args.output, ts.values)
    return 0


def cmd_fit(args) -> int:
    kw = _fit_kwargs(args)
    truth = _load_model(args.truth) if args.truth else None
    series = _load_series(args.input).centered()
    if args.lam is not None:
        cfg = FitConfig(lam=args.lam, **kw)
    else:
        cfg = FitConfig.from_lambda0(args.lambda0, series.T, **kw)
    res = fit(series, cfg)
    args.output.write_text(json.dumps(_result_json(res, series), indent=2) + "\n")
    err = "nan" if truth is None else f"{estimation_error(res.params, truth):.4f}"
    print(f"p={res.order_p} q={res.order_q} err={err} iters={res.iterations}")
    return 0


def cmd_path(args) -> int:
    kw = _fit_kwargs(args)
    series = _load_series(args.input).centered()
    if args.lam is not None:
        if len(args.lam) != 3:
            raise UsageError("--lambda takes lo,hi,count")
        spec = PathSpec.log_spaced(args.lam[0], args.lam[1], int(args.lam[2]))
    else:
        spec = PathSpec(lambda0_grid=tuple(args.lambda0 or DEFAULT_LAMBDA0_GRID))
    results = lambda_path(series, spec, FitConfig(lam=0.0, **kw))
    chosen = select_bic(results, series)
    entries = []
    for res in results:
        if isinstance(res, PathFailure):
            entries.append({"lambda": res.lam, "error": res.error})
        else:
            entries.append({**_result_json(res, series), "bic": bic(res, series)})
    out = {"results": entries, "selected": results.index(chosen), "mean": series.mean}
    args.output.write_text(json.dumps(out, indent=2) + "\n")
    print(f"selected lambda={chosen.lam:.6g} p={chosen.order_p} q={chosen.order_q}")
    return 0


def cmd_forecast(args) -> int:
    if args.horizon < 1:
        raise UsageError("--horizon must be positive")
    if not args.model.is_file():
        raise UsageError(f"model file not found: {args.model}")
    d = json.loads(args.model.read_text())
    params = ArmaParams.from_dict(d["params"] if "params" in d else d)
    series = _load_series(args.input)
    mean = float(d.get("mean", 0.0))
    path = forecast(series.values - mean, params, args.horizon) + mean
    write_series_csv(args.output, path, header="forecast")
    return 0


def cmd_bench(args) -> int:
    kw = _fit_kwargs(args)
    if args.reps < 1 or args.T < 2 or args.jobs < 1 or args.horizon < 1:
        raise UsageError("--reps, --jobs and --horizon must be positive and --T >= 2")
    report = run_table1(
        args.models, args.reps, T=args.T, lambda0_grid=args.lambda0, seed=args.seed,
        horizon=args.horizon, jobs=args.jobs, **kw,
    )
    stem = args.output
    stem.with_suffix(".json").write_text(report.to_json())
    stem.with_suffix(".csv").write_text(report.to_csv())
    stem.with_suffix(".txt").write_text(report.summary())
    sys.stdout.write(report.summary())
    return 0


COMMANDS = {
    "simulate": cmd_simulate,
    "fit": cmd_fit,
    "path": cmd_path,
    "forecast": cmd_forecast,
    "bench": cmd_bench,
}


def main(argv: Optional[List[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0) and EXIT_USAGE
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return COMMANDS[args.command](args)
    except (UsageError, StabilityError, SeriesLengthError, FitError, SamplingError,
            ValueError, OSError) as exc:
        print(f"hsarma {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
