"""
Command-line entry point.

Every subcommand reads files given by flags and either prints a table to
stdout or writes artifacts into ``--out``. Exit status is 0 on success, 2 on
usage errors and 1 on data or estimation errors, with a JSON error record on
stderr.
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import os
import sys
import traceback
import warnings
from contextlib import contextmanager
from pathlib import Path

import numpy as np

from hfvol import aggregate as agg
from hfvol import diagnostics, garch, mcmodel, periodicity, simulate, stats, ticktape

__all__ = ["main", "run"]

LOCK_NAME = ".hfvol.lock"


class UsageError(Exception):
    pass


class DataError(Exception):
    def __init__(self, message: str, module: str = "cli") -> None:
        self.module = module
        super().__init__(message)


# ----------------------------------------------------------------------------
# io helpers


def _num(v) -> str:
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    if isinstance(v, np.integer):
        return str(int(v))
    return str(v)


def _clean(obj):
    """JSON-safe copy: non-finite floats become strings, arrays lists."""
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [_clean(v) for v in obj.tolist()]
    if isinstance(obj, (np.floating, float)):
        f = float(obj)
        return f if math.isfinite(f) else str(f)
    if isinstance(obj, np.integer):
        return int(obj)
    return obj


def _write_json(path: Path, obj) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(_clean(obj), fh, indent=2, sort_keys=True)
        fh.write("\n")


def _read_json(path: Path) -> dict:
    try:
        with open(path, encoding="utf-8") as fh:
            return json.load(fh)
    except FileNotFoundError:
        raise DataError(f"missing artifact {path}", "cli") from None


def _emit(rows, header, out: Path | None, name: str, fmt: str = "csv") -> None:
    rows = [list(r) for r in rows]
    if fmt == "json":
        text = json.dumps(_clean([dict(zip(header, r)) for r in rows]), indent=2) + "\n"
    else:
        lines = [",".join(header)] + [",".join(_num(v) for v in r) for r in rows]
        text = "\n".join(lines) + "\n"
    if out is None:
        sys.stdout.write(text)
    else:
        suffix = ".json" if fmt == "json" else ".csv"
        with open(out / (name + suffix), "w", encoding="utf-8", newline="") as fh:
            fh.write(text)


def _read_column(path: Path, column: str | None) -> np.ndarray:
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        fields = reader.fieldnames or []
        if column is None:
            column = next((c for c in ("y", "r") if c in fields), None)
        if column not in fields:
            raise DataError(f"{path}: no column {column!r}", "cli")
        vals = []
        for i, row in enumerate(reader, 2):
            try:
                vals.append(float(row[column]))
            except ValueError:
                raise DataError(f"{path}: line {i}: bad number {row[column]!r}", "cli") from None
    return np.asarray(vals)


@contextmanager
def _locked(out: Path | None):
    if out is None:
        yield
        return
    out.mkdir(parents=True, exist_ok=True)
    lock = out / LOCK_NAME
    try:
        fd = os.open(lock, os.O_CREAT | os.O_EXCL | os.O_WRONLY)
    except FileExistsError:
        raise DataError(f"output directory {out} is locked by another run", "cli") from None
    os.write(fd, str(os.getpid()).encode())
    os.close(fd)
    try:
        yield
    finally:
        lock.unlink(missing_ok=True)


def _threads(args) -> int | None:
    if getattr(args, "threads", None):
        return args.threads
    env = os.environ.get("HFVOL_THREADS")
    if env:
        try:
            return max(int(env), 1)
        except ValueError:
            raise UsageError(f"HFVOL_THREADS must be an integer, got {env!r}") from None
    return None


def _session(args) -> tuple[int, int]:
    try:
        return ticktape.parse_session(args.session)
    except ValueError as exc:
        raise UsageError(str(exc)) from None


def _scheme(args) -> agg.Scheme:
    try:
        scheme = agg.Scheme.parse(args.scheme)
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    interval = getattr(args, "interval", None)
    if interval is not None:
        if scheme.kind != "time":
            raise UsageError(f"--interval conflicts with scheme {scheme}")
        scheme = agg.Scheme("time", interval)
    return scheme


def _load_tape(args) -> ticktape.TickTape:
    fmt = ticktape.TapeFormat(delimiter=getattr(args, "delimiter", ","))
    try:
        tape = ticktape.read_tape(args.input, fmt)
    except FileNotFoundError:
        raise DataError(f"no such tape file {args.input}", "ticktape") from None
    lo, hi = _session(args)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        tape = ticktape.filter_session(tape, lo, hi)
    return ticktape.collapse_tape(tape)


def _series_rows(series: agg.ReturnSeries):
    for d in series.days:
        for n, (a, b, w, r) in enumerate(
            zip(d.starts.tolist(), d.ends.tolist(), d.durations.tolist(), d.returns.tolist())
        ):
            yield d.date.isoformat(), n, ticktape.format_time(a), ticktape.format_time(b), w, r


def _daily_sigma(tape, args, daily_fit_path: str | None = None):
    """Daily volatility path, from a daily_fit.json or a fresh fit."""
    if daily_fit_path:
        doc = _read_json(Path(daily_fit_path))
        by_date = {row["date"]: float(row["sigma"]) for row in doc["sigma"]}
        missing = [d for d in tape.dates if d.isoformat() not in by_date]
        if missing:
            raise DataError(f"daily fit has no volatility for {missing[0]}", "periodicity")
        return np.array([by_date[d.isoformat()] for d in tape.dates]), None, doc.get("model")
    opts = mcmodel.PipelineOptions(session=_session(args))
    fit, sig, model = mcmodel._daily_stage(agg.daily_returns(tape), opts)
    return sig, fit, model


def _daily_doc(tape, sig, fit, model) -> dict:
    doc = fit.to_dict() if fit is not None else {"model": model, "n_obs": len(tape.days)}
    if fit is None:
        doc["params"] = {"sigma": float(sig[0])}
    doc["model"] = model
    doc["sigma"] = [{"date": d.isoformat(), "sigma": float(s)} for d, s in zip(tape.dates, sig)]
    return doc


def _profile_rows(profile):
    if isinstance(profile, dict):
        for date in sorted(profile):
            p = profile[date]
            for a, b, v in zip(p.starts.tolist(), p.ends.tolist(), p.s2.tolist()):
                yield date.isoformat(), ticktape.format_time(a), ticktape.format_time(b), v
    else:
        for a, b, v in zip(profile.starts.tolist(), profile.ends.tolist(), profile.s2.tolist()):
            yield ticktape.format_time(a), ticktape.format_time(b), v


def _profile_header(profile):
    base = ["interval_start", "interval_end", "s2"]
    return (["date"] + base) if isinstance(profile, dict) else base


def _intraday_doc(fit: garch.GarchFit, scheme: agg.Scheme, durations: np.ndarray, scale: float):
    doc = fit.to_dict()
    doc["scheme"] = str(scheme)
    doc["mean_duration_minutes"] = float(np.mean(durations)) / 60.0
    doc["filter_scale"] = scale
    minutes = scheme.size / 60.0 if scheme.kind == "time" else doc["mean_duration_minutes"]
    doc["interval_minutes"] = minutes
    doc["persistence_minutes"] = garch.persistence(fit.params, minutes).as_dict()
    return doc


# ----------------------------------------------------------------------------
# subcommands


def cmd_ingest(args) -> None:
    tape = _load_tape(args)
    out = Path(args.out)
    with open(out / "tape.csv", "w", newline="", encoding="utf-8") as fh:
        ticktape.write_tape(tape, fh)
    _write_json(
        out / "ingest.json",
        {"days": len(tape.days), "trades": tape.n_trades, "first": tape.dates[0].isoformat(),
         "last": tape.dates[-1].isoformat()},
    )


def cmd_aggregate(args) -> None:
    tape = _load_tape(args)
    series = agg.aggregate(tape, _scheme(args), _session(args))
    out = Path(args.out) if args.out else None
    header = ["date", "n", "start_time", "end_time", "duration", "r"]
    _emit(_series_rows(series), header, out, "returns", args.format)


def _returns_for(args, tape):
    if args.daily:
        return agg.daily_returns(tape)
    series = agg.aggregate(tape, _scheme(args), _session(args))
    return series.values


def cmd_describe(args) -> None:
    tape = _load_tape(args)
    x = _returns_for(args, tape)
    d = stats.describe(x).as_dict()
    out = Path(args.out) if args.out else None
    _emit(d.items(), ["statistic", "value"], out, "describe", args.format)


def cmd_acf(args) -> None:
    tape = _load_tape(args)
    x = _returns_for(args, tape)
    if args.abs and args.squared:
        raise UsageError("--abs and --squared are exclusive")
    if args.abs:
        x = np.abs(x)
    elif args.squared:
        x = x * x
    table = stats.acf(x, args.lags)
    rows = zip(table.lags.tolist(), table.values.tolist(), [table.bound] * len(table.lags))
    out = Path(args.out) if args.out else None
    _emit(rows, ["lag", "acf", "bound"], out, "acf", args.format)


def cmd_profile(args) -> None:
    tape = _load_tape(args)
    series = agg.aggregate(tape, _scheme(args), _session(args))
    if args.normalized:
        sig, _, _ = _daily_sigma(tape, args, args.daily_fit)
        series = mcmodel.normalized_returns(series, sig)
    prof = stats.intraday_profile(series, args.reducer)
    starts = series.days[0].starts.tolist()
    rows = ((n, ticktape.format_time(s), v) for n, (s, v) in enumerate(zip(starts, prof.tolist())))
    out = Path(args.out) if args.out else None
    _emit(rows, ["n", "interval_start", args.reducer], out, "profile", args.format)


def _fit_table(doc: dict):
    params = doc.get("params", {})
    se = doc.get("stderr", {})
    ts = doc.get("tstat", {})
    for name in doc.get("free_params", list(params)):
        yield name, params[name], se.get(name, ""), ts.get(name, "")
    pm = doc.get("persistence_minutes") or doc.get("persistence")
    if pm:
        for key in ("persistence", "half_life", "mean_lag"):
            yield key, pm[key], "", ""
    yield "loglik", doc.get("loglik", ""), "", ""


def _write_fit(out: Path, name: str, doc: dict, fmt: str) -> None:
    """The JSON report is always written; ``csv`` adds a flat parameter table."""
    _write_json(out / f"{name}.json", doc)
    if fmt == "csv":
        _emit(_fit_table(doc), ["name", "value", "stderr", "tstat"], out, name, "csv")


def cmd_fit_daily(args) -> None:
    tape = _load_tape(args)
    sig, fit, model = _daily_sigma(tape, args)
    doc = _daily_doc(tape, sig, fit, model)
    _write_fit(Path(args.out), "daily_fit", doc, args.report)


def cmd_periodicity(args) -> None:
    tape = _load_tape(args)
    session = _session(args)
    sig, _, _ = _daily_sigma(tape, args, args.daily_fit)
    if args.grid is not None:
        series = agg.aggregate(tape, agg.Scheme("time", args.grid), session)
        profile = periodicity.estimate_periodicity_grid(series, sig)
    else:
        with open(args.windows, newline="", encoding="utf-8") as fh:
            rows = list(csv.reader(fh))
        if rows and not rows[0][0][:1].isdigit():
            rows = rows[1:]
        try:
            edges = [ticktape.parse_time(r[0]) for r in rows] + [ticktape.parse_time(rows[-1][1])]
        except (ValueError, IndexError):
            raise DataError(f"{args.windows}: expected rows of start,end times", "periodicity") from None
        profile = periodicity.estimate_periodicity_irregular(
            edges, tape, sig, method=args.method, session=session, threads=_threads(args)
        )
    out = Path(args.out) if args.out else None
    _emit(_profile_rows(profile), _profile_header(profile), out, "profile", "csv")


def _pipeline_fit(args, tape, gmm: bool = True) -> mcmodel.McFit:
    options = mcmodel.PipelineOptions(
        session=_session(args),
        irregular_method=getattr(args, "method", "ticks"),
        gmm=gmm,
        threads=_threads(args),
    )
    return mcmodel.fit_pipeline(tape, _scheme(args), options=options)


def cmd_filter(args) -> None:
    tape = _load_tape(args)
    fit = _pipeline_fit(args, tape, gmm=False)
    rows = ((d.isoformat(), n, y) for d, n, y in fit.filtered.rows())
    out = Path(args.out) if args.out else None
    _emit(rows, ["date", "n", "y"], out, "filtered", "csv")


def cmd_fit_intraday(args) -> None:
    y = _read_column(Path(args.input), "y")
    fit = garch.fit_garch11(y)
    doc = fit.to_dict()
    if args.interval_minutes:
        doc["interval_minutes"] = args.interval_minutes
        doc["persistence_minutes"] = garch.persistence(fit.params, args.interval_minutes).as_dict()
    _write_fit(Path(args.out), "intraday_fit", doc, args.report)


def _parse_mc(text: str) -> dict[str, int]:
    out = {"n": 1000, "reps": 100_000, "seed": 0}
    for part in text.split(","):
        if not part:
            continue
        key, _, val = part.partition("=")
        if key not in out or not val:
            raise UsageError(f"bad --mc-cv entry {part!r}; keys are n, reps, seed")
        try:
            out[key] = int(val)
        except ValueError:
            raise UsageError(f"bad --mc-cv value {part!r}") from None
    return out


def cmd_diagnose(args) -> None:
    out = Path(args.out) if args.out else None
    mc = _parse_mc(args.mc_cv) if args.mc_cv is not None else None
    if args.input is None and mc is None:
        raise UsageError("diagnose needs --in and/or --mc-cv")
    if args.input is not None:
        x = _read_column(Path(args.input), args.column)
        res = diagnostics.arch_lm_test(x, args.arch_lags, args.level)
        rows = [(res.p, res.TR2, res.critical_value, res.p_value, int(res.reject), res.n_effective)]
        _emit(rows, ["lags", "TR2", "critical_value", "p_value", "reject", "n_effective"],
              out, "arch_lm", "csv")
        if args.edf:
            e = diagnostics.edf_statistics(x)
            _emit(e.as_dict().items(), ["statistic", "value"], out, "edf", "csv")
    if mc is not None:
        table = diagnostics.mc_critical_values(mc["n"], mc["reps"], mc["seed"])
        _emit(table.rows(), ["statistic", "5%", "2.5%", "1%"], out, "mc_critical_values", "csv")


def cmd_pipeline(args) -> None:
    tape = _load_tape(args)
    fit = _pipeline_fit(args, tape, gmm=True)
    out = Path(args.out)
    _write_json(out / "daily_fit.json", _daily_doc(tape, fit.sigma, fit.daily_fit, fit.daily_model))
    _emit(_profile_rows(fit.profile), _profile_header(fit.profile), out, "profile", "csv")
    _emit(((d.isoformat(), n, y) for d, n, y in fit.filtered.rows()), ["date", "n", "y"],
          out, "filtered", "csv")
    doc = _intraday_doc(fit.intraday_fit, fit.series.scheme, fit.series.durations, fit.filtered.scale)
    if fit.gmm is not None:
        names = list(fit.gmm.names)
        doc["gmm"] = {"M": fit.gmm.M, "condition": fit.gmm.condition,
                      "stderr": dict(zip(names, fit.gmm.stderr.tolist()))}
        rows = ([n] + row for n, row in zip(names, fit.gmm.cov.tolist()))
        _emit(rows, ["param"] + names, out, "gmm_cov", "csv")
    else:
        doc["gmm"] = None
        _emit([], ["param"], out, "gmm_cov", "csv")
    _write_json(out / "intraday_fit.json", doc)


def cmd_simulate(args) -> None:
    try:
        base = simulate.load_config(args.config) if args.config else simulate.SimConfig()
        kw = {}
        if args.days is not None:
            kw["days"] = args.days
        if args.seed is not None:
            kw["seed"] = args.seed
        if args.arrivals is not None:
            kw["arrivals"] = simulate.Arrivals.parse(args.arrivals)
        if args.profile is not None:
            kw["s_profile"] = simulate.SProfile.parse(args.profile)
        cfg = simulate.SimConfig(**{**_config_kwargs(base), **kw})
    except ValueError as exc:
        raise DataError(str(exc), "simulate") from exc
    simulate.export_truth(simulate.simulate(cfg), args.out)


def _config_kwargs(cfg: simulate.SimConfig) -> dict:
    return {f: getattr(cfg, f) for f in cfg.__dataclass_fields__}


def report_rows(fit_dir: Path) -> list[tuple]:
    """Parameter and persistence rows of a pipeline output directory."""
    if not fit_dir.is_dir():
        raise DataError(f"no such fit directory {fit_dir}", "cli")
    daily = _read_json(fit_dir / "daily_fit.json")
    intra = _read_json(fit_dir / "intraday_fit.json")
    rows = []
    for label, doc in (("daily", daily), ("intraday", intra)):
        params = doc.get("params", {})
        se = doc.get("stderr", {})
        ts = doc.get("tstat", {})
        for name in doc.get("free_params", list(params)):
            rows.append((label, name, params[name], se.get(name, ""), ts.get(name, "")))
    for label, doc in (("daily", daily), ("intraday", intra)):
        params = doc.get("params", {})
        if "alpha" not in params:
            continue
        minutes = doc.get("interval_minutes")
        unit = "minutes" if minutes else "periods"
        pm = garch.persistence((params["alpha"], params["beta"]), minutes)
        rows.append((label, "alpha+beta", pm.persistence, "", ""))
        rows.append((label, f"half_life_{unit}", pm.half_life, "", ""))
        rows.append((label, f"mean_lag_{unit}", pm.mean_lag, "", ""))
    return rows


def cmd_report(args) -> None:
    rows = report_rows(Path(args.fit))
    out = Path(args.out) if args.out else None
    _emit(rows, ["component", "name", "value", "stderr", "tstat"], out, "report", args.format)


# ----------------------------------------------------------------------------
# parser


def _add_tape(p, scheme: bool = True) -> None:
    p.add_argument("--in", dest="input", required=True, help="tape CSV (date,time,price)")
    p.add_argument("--session", default="09:30-16:00", help="HH:MM-HH:MM (default %(default)s)")
    p.add_argument("--delimiter", default=",")
    if scheme:
        p.add_argument("--scheme", default="time:300", help="time:<s>, txn:<T> or tick")
        p.add_argument("--interval", type=float, help="clock interval in seconds (time schemes)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="hfvol", description=__doc__.strip().splitlines()[0])
    parser.add_argument("--threads", type=int, help="worker threads (env HFVOL_THREADS)")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("ingest", help="validate and normalize a tape")
    _add_tape(p, scheme=False)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_ingest, writes=True)

    p = sub.add_parser("aggregate", help="build a return series")
    _add_tape(p)
    p.add_argument("--out")
    p.add_argument("--format", choices=("csv", "json"), default="csv")
    p.set_defaults(func=cmd_aggregate, writes=False)

    commands = (
        ("describe", cmd_describe, False, "mean, variance, skewness and kurtosis of returns"),
        ("acf", cmd_acf, True, "sample autocorrelations with 2/sqrt(n) bounds"),
    )
    for name, func, extra, text in commands:
        p = sub.add_parser(name, help=text)
        _add_tape(p)
        p.add_argument("--daily", action="store_true", help="use open-to-close daily returns")
        p.add_argument("--out")
        p.add_argument("--format", choices=("csv", "json"), default="csv")
        if extra:
            p.add_argument("--lags", type=int, default=50)
            p.add_argument("--abs", action="store_true", help="autocorrelations of |r|")
            p.add_argument("--squared", action="store_true", help="autocorrelations of r^2")
        p.set_defaults(func=func, writes=False)

    p = sub.add_parser("profile", help="cross-day mean of r or |r| per grid cell")
    _add_tape(p)
    p.add_argument("--reducer", choices=("mean", "mean_abs"), default="mean_abs")
    p.add_argument("--normalized", action="store_true", help="divide by daily volatility first")
    p.add_argument("--daily-fit", dest="daily_fit")
    p.add_argument("--out")
    p.add_argument("--format", choices=("csv", "json"), default="csv")
    p.set_defaults(func=cmd_profile, writes=False)

    p = sub.add_parser("fit-daily", help="MA(1)-GARCH(1,1) on daily returns")
    _add_tape(p, scheme=False)
    p.add_argument("--out", required=True)
    p.add_argument("--report", choices=("json", "csv"), default="json")
    p.set_defaults(func=cmd_fit_daily, writes=True)

    p = sub.add_parser("periodicity", help="intraday periodicity profile")
    _add_tape(p, scheme=False)
    g = p.add_mutually_exclusive_group(required=True)
    g.add_argument("--grid", type=float, help="clock grid in seconds")
    g.add_argument("--windows", help="CSV of start,end window times")
    p.add_argument("--method", choices=("ticks", "edges"), default="ticks")
    p.add_argument("--daily-fit", dest="daily_fit")
    p.add_argument("--out")
    p.set_defaults(func=cmd_periodicity, writes=False)

    p = sub.add_parser("filter", help="filtered returns y")
    _add_tape(p)
    p.add_argument("--method", choices=("ticks", "edges"), default="ticks")
    p.add_argument("--out")
    p.set_defaults(func=cmd_filter, writes=False)

    p = sub.add_parser("fit-intraday", help="GARCH(1,1) on a filtered series")
    p.add_argument("--in", dest="input", required=True, help="CSV with column y")
    p.add_argument("--interval-minutes", dest="interval_minutes", type=float)
    p.add_argument("--out", required=True)
    p.add_argument("--report", choices=("json", "csv"), default="json")
    p.set_defaults(func=cmd_fit_intraday, writes=True)

    p = sub.add_parser("diagnose", help="ARCH-LM, EDF statistics, MC critical values")
    p.add_argument("--in", dest="input", help="CSV series")
    p.add_argument("--column")
    p.add_argument("--arch-lags", dest="arch_lags", type=int, default=2)
    p.add_argument("--level", type=float, default=0.01)
    p.add_argument("--edf", action="store_true")
    p.add_argument("--mc-cv", dest="mc_cv", nargs="?", const="", help="n=1000,reps=100000,seed=0")
    p.add_argument("--out")
    p.set_defaults(func=cmd_diagnose, writes=False)

    p = sub.add_parser("pipeline", help="full two-step estimation")
    _add_tape(p)
    p.add_argument("--method", choices=("ticks", "edges"), default="ticks")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_pipeline, writes=True)

    p = sub.add_parser("simulate", help="synthetic tape with ground truth")
    p.add_argument("--config", help="key = value config file")
    p.add_argument("--days", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--arrivals", help="grid:<seconds> or poisson:<rate>")
    p.add_argument("--profile", help="flat, u_shape[:k] or custom:v1;v2;...")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_simulate, writes=True)

    p = sub.add_parser("report", help="parameter and persistence tables of a fit directory")
    p.add_argument("--fit", required=True)
    p.add_argument("--format", choices=("csv", "json"), default="csv")
    p.add_argument("--out")
    p.set_defaults(func=cmd_report, writes=False)
    return parser


def _module_of(exc: BaseException) -> str:
    if isinstance(exc, ticktape.TapeFormatError):
        return "ticktape"
    if isinstance(exc, DataError):
        return exc.module
    if isinstance(exc, mcmodel.PipelineError):
        return {"daily": "garch", "intraday": "garch", "aggregate": "aggregate",
                "periodicity": "periodicity", "gmm": "mcmodel"}.get(exc.stage, "mcmodel")
    module = "cli"
    for frame in traceback.extract_tb(exc.__traceback__):
        stem = Path(frame.filename).stem
        if Path(frame.filename).parent.name == "hfvol" and stem != "cli":
            module = stem
    return module


def _error_record(exc: BaseException) -> dict:
    cause = exc
    while isinstance(cause, mcmodel.PipelineError) and cause.__cause__ is not None:
        cause = cause.__cause__
    line = getattr(cause, "line", None)
    return {
        "error": type(exc).__name__,
        "module": _module_of(exc) if not isinstance(cause, ticktape.TapeFormatError) else "ticktape",
        "message": str(exc),
        "line": line,
    }


def run(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    out = Path(args.out) if getattr(args, "out", None) else None
    try:
        with _locked(out):
            args.func(args)
    except UsageError as exc:
        parser.print_usage(sys.stderr)
        sys.stderr.write(f"hfvol: error: {exc}\n")
        return 2
    except (ValueError, DataError, OSError, np.linalg.LinAlgError, KeyError) as exc:
        sys.stderr.write(json.dumps(_clean(_error_record(exc))) + "\n")
        return 1
    return 0


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
