"""Command-line interface: ``rkhs-streamci <command> [options]``.

Commands
--------
fit       averaged SGD estimate on a grid, emitted at each checkpoint
infer     pointwise normal and percentile intervals
band      simultaneous confidence band
oracle    closed-form leading bias and variance
simulate  replicated coverage experiment (pointwise or band)
bench     online versus offline cumulative cost

Exit status: 0 success, 1 data error, 2 usage or configuration error.
Errors are printed to stderr as one JSON object.
"""
from __future__ import annotations

import argparse
import json
import sys

import numpy as np

from . import __version__
from .bootstrap import BootstrapEnsemble, LAWS
from .inference import (band_to_csv, intervals_to_csv, normal_interval, percentile_interval,
                        simultaneous_band)
from .mercer import ConfigurationError, DomainError
from .offline import BenchConfig, cost_report_csv, timing_bench
from .oracle import TheoryContext, oracle_report
from .schedules import Constant, parse_schedule, schedule_to_dict, steps, validate
from .sgd import DataError, SgdTrajectory
from .simulate import (ExperimentConfig, band_experiment, coverage_experiment, harness_basis,
                       stable_scale, truth_eval)
from .streamio import StreamParseError, parse_stream

SCHEMA = "rkhs-streamci/1"

DEFAULTS = {
    "case": 1, "n": None, "J": 300, "level": 0.95, "alpha": 2.0, "schedule": "undersmoothed:0.25",
    "law": "gaussian", "band_mode": "symmetric", "seed": 20240, "out": None, "grid_size": 100,
    "checkpoints": None, "truncation": 200, "step_scale": None, "sigma2": 0.2, "z0": 0.5,
    "points": None, "input": "-", "replicates": 200, "kind": "coverage", "workers": None,
}


class UsageError(Exception):
    pass


def _parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="rkhs-streamci", description="Online bootstrap inference for functional SGD.")
    p.add_argument("--version", action="version", version=__version__)
    sub = p.add_subparsers(dest="command", required=True)

    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON file of option values; flags override it")
    common.add_argument("--alpha", type=float)
    common.add_argument("--truncation", type=int, help="number of eigenpairs in the kernel")
    common.add_argument("--schedule", help="constant[:gamma] | poly:<xi> | undersmoothed:<eps>")
    common.add_argument("--step-scale", type=float, dest="step_scale",
                        help="multiplier of the step sizes (default: 1/sup K for decaying schedules)")
    common.add_argument("--seed", type=int)
    common.add_argument("--out", help="output path (default stdout)")

    streaming = argparse.ArgumentParser(add_help=False)
    streaming.add_argument("--input", help="CSV or JSON-lines stream, '-' for stdin")
    streaming.add_argument("--grid-size", type=int, dest="grid_size")
    streaming.add_argument("--checkpoints", help="comma-separated arrival counts")

    boot = argparse.ArgumentParser(add_help=False)
    boot.add_argument("--J", type=int)
    boot.add_argument("--level", type=float)
    boot.add_argument("--law", choices=LAWS)

    sub.add_parser("fit", parents=[common, streaming], help="averaged SGD estimate")
    inf = sub.add_parser("infer", parents=[common, streaming, boot], help="pointwise intervals")
    inf.add_argument("--points", help="comma-separated evaluation points (default: grid)")
    band = sub.add_parser("band", parents=[common, streaming, boot], help="simultaneous band")
    band.add_argument("--band-mode", choices=["symmetric", "paper"], dest="band_mode")
    orc = sub.add_parser("oracle", parents=[common], help="theory oracle report")
    orc.add_argument("--n", type=int)
    orc.add_argument("--case", type=int)
    orc.add_argument("--sigma2", type=float)
    orc.add_argument("--z0", type=float)
    sim = sub.add_parser("simulate", parents=[common, boot], help="coverage experiment")
    sim.add_argument("--kind", choices=["coverage", "band"])
    sim.add_argument("--case", type=int)
    sim.add_argument("--n", type=int)
    sim.add_argument("--replicates", type=int)
    sim.add_argument("--checkpoints", help="comma-separated arrival counts")
    sim.add_argument("--grid-size", type=int, dest="grid_size")
    sim.add_argument("--band-mode", choices=["symmetric", "paper"], dest="band_mode")
    sim.add_argument("--sigma2", type=float)
    sim.add_argument("--workers", type=int)
    bench = sub.add_parser("bench", parents=[common], help="timing comparison")
    bench.add_argument("--J", type=int)
    bench.add_argument("--checkpoints", help="comma-separated arrival counts")
    return p


def _resolve(args) -> dict:
    cfg = dict(DEFAULTS)
    if args.config:
        try:
            with open(args.config) as fh:
                loaded = json.load(fh)
        except (OSError, ValueError) as exc:
            raise UsageError(f"cannot read config {args.config}: {exc}") from None
        if not isinstance(loaded, dict):
            raise UsageError("config file must hold a JSON object")
        unknown = set(loaded) - set(DEFAULTS)
        if unknown:
            raise UsageError(f"unknown config keys {sorted(unknown)}")
        cfg.update(loaded)
    for key, val in vars(args).items():
        if key in cfg and val is not None:
            cfg[key] = val
    cfg["command"] = args.command
    return cfg


def _int_list(text):
    if text is None:
        return None
    if isinstance(text, list):
        return [int(v) for v in text]
    try:
        return [int(v) for v in str(text).split(",") if v.strip()]
    except ValueError:
        raise UsageError(f"bad integer list {text!r}") from None


def _float_list(text):
    if text is None or isinstance(text, list):
        return text
    try:
        return [float(v) for v in str(text).split(",") if v.strip()]
    except ValueError:
        raise UsageError(f"bad number list {text!r}") from None


def _schedule(cfg, basis):
    text = cfg["schedule"]
    scale = cfg["step_scale"]
    if scale is None:
        scale = 1.0 if text.startswith("constant") else stable_scale(basis)
    return parse_schedule(text, alpha=cfg["alpha"], scale=scale)


def _write(cfg, text: str) -> None:
    if cfg["out"] in (None, "-"):
        sys.stdout.write(text)
    else:
        with open(cfg["out"], "w") as fh:
            fh.write(text)


def _load_stream(cfg):
    stream = parse_stream(cfg["input"])
    if len(stream) == 0:
        raise DataError("no data")
    return stream


def _checkpoints(cfg, n):
    cps = _int_list(cfg["checkpoints"]) or [n]
    cps = sorted(set(min(c, n) for c in cps if c >= 1))
    if not cps:
        raise UsageError("no valid checkpoints")
    return cps


def _echo(cfg, basis, sched, n) -> dict:
    out = {k: v for k, v in cfg.items() if k != "config"}
    out.update({"basis": basis.to_dict(), "resolved_schedule": schedule_to_dict(sched), "n": n})
    return out


def _ingest(target, stream, gam, start, stop):
    """Feed arrivals start..stop-1, mapping data errors to stream line numbers."""
    try:
        target.ingest_many(stream.x[start:stop], stream.y[start:stop], gam[start:stop])
    except DataError as exc:
        raise StreamParseError(int(stream.lines[start]), str(exc)) from None


def cmd_fit(cfg) -> int:
    stream = _load_stream(cfg)
    n = len(stream)
    basis = harness_basis(cfg["truncation"], cfg["alpha"])
    sched = _schedule(cfg, basis)
    validate(sched, horizon=n)
    gam = steps(sched, n, horizon=n)
    grid = np.linspace(0, 1, cfg["grid_size"])
    ens = BootstrapEnsemble(basis, 1, "degenerate", seed=cfg["seed"], with_reference=False, capacity=n)
    sink = sys.stdout if cfg["out"] in (None, "-") else open(cfg["out"], "w")
    try:
        sink.write(json.dumps({"schema": SCHEMA, "config": _echo(cfg, basis, sched, n),
                               "stream": stream.summary()}) + "\n")
        done = 0
        for t in _checkpoints(cfg, n):
            _ingest(ens, stream, gam, done, t)
            done = t
            f_bar = ens.eval_averaged(grid)[0]
            sink.write(json.dumps({"t": t, "grid": grid.tolist(), "f_bar": f_bar.tolist()}) + "\n")
            sink.flush()
    finally:
        if sink is not sys.stdout:
            sink.close()
    return 0


def _ensemble_run(cfg):
    stream = _load_stream(cfg)
    n = len(stream)
    basis = harness_basis(cfg["truncation"], cfg["alpha"])
    sched = _schedule(cfg, basis)
    validate(sched, horizon=n)
    gam = steps(sched, n, horizon=n)
    if cfg["J"] < 2:
        raise UsageError("J must be at least 2")
    ens = BootstrapEnsemble(basis, cfg["J"], cfg["law"], seed=cfg["seed"], capacity=n)
    _ingest(ens, stream, gam, 0, n)
    return stream, basis, sched, ens


def cmd_infer(cfg) -> int:
    stream, basis, sched, ens = _ensemble_run(cfg)
    pts = _float_list(cfg["points"])
    pts = np.linspace(0, 1, cfg["grid_size"]) if pts is None else np.asarray(pts)
    try:
        vals = ens.eval_averaged_all(pts)
    except DomainError as exc:
        raise UsageError(str(exc)) from None
    normal, perc = [], []
    for m in range(pts.size):
        normal.append(normal_interval(vals[0, m], vals[1:, m], cfg["level"]))
        perc.append(percentile_interval(vals[0, m], vals[1:, m], cfg["level"]))
    if cfg["out"] and cfg["out"].endswith(".csv"):
        _write(cfg, intervals_to_csv(normal + perc, list(pts) * 2))
        return 0
    rows = [dict(ci.to_dict(), x=float(p)) for p, ci in zip(list(pts) * 2, normal + perc)]
    _write(cfg, json.dumps({"schema": SCHEMA, "config": _echo(cfg, basis, sched, len(stream)),
                            "t": ens.count, "intervals": rows}, indent=2) + "\n")
    return 0


def cmd_band(cfg) -> int:
    stream, basis, sched, ens = _ensemble_run(cfg)
    grid = np.linspace(0, 1, cfg["grid_size"])
    vals = ens.eval_averaged_all(grid)
    mode = "paper_literal" if cfg["band_mode"] == "paper" else cfg["band_mode"]
    b = simultaneous_band(grid, vals[0], vals[1:] - vals[0], cfg["level"], mode)
    if cfg["out"] and cfg["out"].endswith(".csv"):
        _write(cfg, band_to_csv(b))
        return 0
    _write(cfg, json.dumps({"schema": SCHEMA, "config": _echo(cfg, basis, sched, len(stream)),
                            "t": ens.count, "band": b.to_dict()}, indent=2) + "\n")
    return 0


def cmd_oracle(cfg) -> int:
    n = cfg["n"] or 1000
    basis = harness_basis(cfg["truncation"], cfg["alpha"])
    sched = _schedule(cfg, basis)
    coeffs = basis.project(lambda x: truth_eval(cfg["case"], x))
    ctx = TheoryContext(basis, sched, n, cfg["sigma2"], coeffs)
    report = oracle_report(ctx, cfg["z0"])
    _write(cfg, json.dumps({"schema": SCHEMA, "config": _echo(cfg, basis, sched, n), **report}, indent=2) + "\n")
    return 0


def cmd_simulate(cfg) -> int:
    n = cfg["n"] or 1500
    basis = harness_basis(cfg["truncation"], cfg["alpha"])
    sched = _schedule(cfg, basis)
    econf = ExperimentConfig(
        case_id=cfg["case"], n=n, checkpoints=_int_list(cfg["checkpoints"]) or [n],
        replicates=cfg["replicates"], J=cfg["J"], level=cfg["level"], schedule=sched,
        sigma2=cfg["sigma2"], master_seed=cfg["seed"], grid_size=cfg["grid_size"], law=cfg["law"],
        band_mode="paper_literal" if cfg["band_mode"] == "paper" else cfg["band_mode"],
        alpha=cfg["alpha"], truncation=cfg["truncation"], workers=cfg["workers"])
    run = band_experiment if cfg["kind"] == "band" else coverage_experiment
    report = run(econf)
    if cfg["out"] in (None, "-"):
        sys.stdout.write(report.to_json() + "\n")
    else:
        prefix = cfg["out"][:-4] if cfg["out"].endswith(".csv") else cfg["out"]
        with open(prefix + ".csv", "w") as fh:
            fh.write(report.to_csv())
        with open(prefix + ".json", "w") as fh:
            fh.write(report.to_json())
    if report.aborted:
        sys.stderr.write(json.dumps({"error": "ReplicateAborted", "count": report.aborted,
                                     "details": report.errors[:10]}) + "\n")
        return 1
    return 0


def cmd_bench(cfg) -> int:
    basis = harness_basis(cfg["truncation"], cfg["alpha"])
    sched = _schedule(cfg, basis)
    bc = BenchConfig(checkpoints=_int_list(cfg["checkpoints"]) or [250, 500, 1000, 2000],
                     J=cfg["J"], schedule=sched, basis=basis, seed=cfg["seed"])
    report = timing_bench(bc)
    if cfg["out"] and cfg["out"].endswith(".csv"):
        _write(cfg, cost_report_csv(report))
    else:
        _write(cfg, json.dumps({"schema": SCHEMA, **report}, indent=2) + "\n")
    return 0


COMMANDS = {"fit": cmd_fit, "infer": cmd_infer, "band": cmd_band, "oracle": cmd_oracle,
            "simulate": cmd_simulate, "bench": cmd_bench}


def _fail(kind: str, message: str, code: int, line=None) -> int:
    err = {"error": kind, "message": message}
    if line is not None:
        err["line"] = line
    sys.stderr.write(json.dumps(err) + "\n")
    return code


def main(argv=None) -> int:
    parser = _parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        cfg = _resolve(args)
        return COMMANDS[args.command](cfg)
    except StreamParseError as exc:
        return _fail("DataError", str(exc), 1, exc.line)
    except DataError as exc:
        return _fail("DataError", str(exc), 1)
    except (UsageError, ConfigurationError, DomainError) as exc:
        return _fail("UsageError", str(exc), 2)
    except OSError as exc:
        return _fail("IOError", str(exc), 1)


if __name__ == "__main__":
    sys.exit(main())
