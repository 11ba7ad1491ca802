"""Command-line interface and the batch pipeline.

Subcommands ``simulate``, ``ingest``, ``estimate``, ``jumps``, ``fit`` and
``evaluate`` run one stage each on CSV/JSON files; ``run`` chains them from a
single JSON config into an artifact directory::

    out/
      sessions/sessions.csv, returns.csv[, truth.csv]
      measures.csv
      fits/<label>.json, fits/<label>.states.csv
      forecasts/<label>.csv
      plotdata/components.csv, plotdata/jumps.csv
      report.json
      manifest.json

Exit codes: 0 success, 2 config error, 3 data error, 4 numeric error.
"""

from __future__ import annotations

import argparse
import contextlib
import csv
import dataclasses
import datetime as dt
import hashlib
import json
import logging
import math
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .errors import AlignmentError, ConfigError, DataError, FormatError, NumericError, WavevolError
from .estimators import DailyMeasures, EstimatorConfig, estimate_day
from .evaluation import ANNUALIZATION, ForecastRecord, rolling_evaluate
from .market_data import (
    SessionCalendar,
    TradingSession,
    parse_ticks,
    read_returns,
    read_sessions,
    sessionize,
    write_returns,
    write_sessions,
)
from .models import FitResult, ModelData, ModelSpec, compare_models, fit
from .simulator import SimConfig, VolSpec, simulate_days
from .wavelet import detect_jumps

logger = logging.getLogger("wavevol")

EXIT_OK, EXIT_CONFIG, EXIT_DATA, EXIT_NUMERIC = 0, 2, 3, 4


# ---------------------------------------------------------------- file formats

def _fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, (bool, np.bool_)):
        return str(bool(v)).lower()
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return str(v)


def _write_csv(path, header, rows) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([_fmt(v) for v in row])


def _write_json(path, obj) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(obj, fh, indent=2, sort_keys=True, allow_nan=True)
        fh.write("\n")


def _read_json(path) -> dict:
    try:
        with open(path, encoding="utf-8") as fh:
            return json.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read {path}: {exc.strerror}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON ({exc})") from exc


_VAR_COLUMNS = ("rv", "bv", "tsrv", "rk", "jv", "jwtsrv")


def measures_header(n_bands: int) -> list[str]:
    return ["date", "n", *_VAR_COLUMNS, *(f"jw_c{j}" for j in range(1, n_bands + 1)), "g"]


def write_measures(measures: list[DailyMeasures], path, annualize: bool = False) -> None:
    """Daily measures CSV; ``annualize`` reports ``sqrt(252 * v)`` for every variance column."""
    n_bands = len(measures[0].components) if measures else 5

    def tr(v):
        return math.sqrt(ANNUALIZATION * max(v, 0.0)) if annualize else v

    rows = ([m.date, m.n, *(tr(getattr(m, c)) for c in _VAR_COLUMNS), *(tr(c) for c in m.components), m.G]
            for m in measures)
    _write_csv(path, measures_header(n_bands), rows)


def read_measures(path) -> list[DailyMeasures]:
    out = []
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        names = reader.fieldnames or []
        bands = [c for c in names if c.startswith("jw_c")]
        if not bands or names != measures_header(len(bands)):
            raise FormatError(f"{path}: expected header {','.join(measures_header(5))}")
        for line in reader:
            try:
                v = {c: float(line[c]) for c in _VAR_COLUMNS}
                comp = np.array([float(line[c]) for c in bands])
                out.append(DailyMeasures(date=line["date"], n=int(line["n"]), components=comp,
                                         G=int(line["g"]), **v))
            except (TypeError, ValueError) as exc:
                raise FormatError(f"{path}: bad measures row {line!r}") from exc
    return out


def write_states(fit_: FitResult, dates, path) -> None:
    st = fit_.states
    u = st.u if st.u is not None else [None] * len(st.h)
    _write_csv(path, ["date", "h", "z", "u"], zip(dates, st.h, st.z, u))


def write_forecasts(records: list[ForecastRecord], path) -> None:
    _write_csv(path, ["date", "h_forecast", "vol_forecast", "target"],
               ((r.date, r.h_forecast, r.vol_forecast, r.target_variance) for r in records))


def jump_rows(sessions: list[TradingSession], filt: str) -> list[list]:
    rows = []
    for s in sessions:
        jd = detect_jumps(s.log_prices, filt)
        for k, size in zip(jd.k, jd.sizes):
            rows.append([s.date, int(k), float(size), jd.threshold, jd.d])
    return rows


def _report_dict(report) -> dict:
    d = report.to_dict()
    return {k: d[k] for k in ("alpha_mz", "beta_mz", "r2_mz", "hmse", "qlike", "n_obs", "scheme", "gaps")}


# ---------------------------------------------------------------- configuration

def _dataclass_from(cls, d: dict, what: str):
    if not isinstance(d, dict):
        raise ConfigError(f"{what} must be a JSON object")
    names = {f.name for f in dataclasses.fields(cls)}
    unknown = sorted(set(d) - names)
    if unknown:
        raise ConfigError(f"{what}: unknown field(s) {', '.join(unknown)}")
    try:
        return cls(**d)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"{what}: {exc}") from exc


def estimator_config(d: dict | None) -> EstimatorConfig:
    return _dataclass_from(EstimatorConfig, d or {}, "estimator")


def simulation_config(d: dict | None, seed: int | None = None) -> tuple[SimConfig, dt.date]:
    """``SimConfig`` plus the first session date from a JSON object."""
    d = dict(d or {})
    try:
        start = dt.date.fromisoformat(d.pop("start_date", "2020-01-02"))
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"simulation.start_date: {exc}") from exc
    vol = _dataclass_from(VolSpec, d.pop("vol", {}), "simulation.vol")
    if seed is not None:
        d["seed"] = seed
    return _dataclass_from(SimConfig, {**d, "vol": vol}, "simulation"), start


def model_specs(items) -> list[ModelSpec]:
    if not isinstance(items, list):
        raise ConfigError("models must be a list")
    specs = []
    for i, m in enumerate(items):
        if not isinstance(m, dict) or "family" not in m:
            raise ConfigError(f"models[{i}] needs a family")
        try:
            specs.append(ModelSpec.from_dict(m))
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"models[{i}]: {exc}") from exc
    labels = [s.label for s in specs]
    if len(set(labels)) != len(labels):
        raise ConfigError("models contains duplicate specifications")
    return specs


@dataclasses.dataclass
class EvaluationOptions:
    split: str | None = None
    split_fraction: float = 0.6
    scheme: str = "fixed-params"
    refit_every: int = 20
    target: str | None = None
    min_in_sample: int = 100
    min_out_of_sample: int = 20

    def __post_init__(self):
        if self.scheme not in ("fixed-params", "re-estimate"):
            raise ConfigError(f"unknown scheme {self.scheme!r}")
        if not 0.0 < self.split_fraction < 1.0:
            raise ConfigError("split_fraction must be in (0, 1)")
        if self.refit_every < 1:
            raise ConfigError("refit_every must be >= 1")
        if self.min_in_sample < 1 or self.min_out_of_sample < 1:
            raise ConfigError("minimum sample sizes must be >= 1")
        if self.target is not None and self.target not in DailyMeasures.MEASURES:
            raise ConfigError(f"unknown target measure {self.target!r}")

    def split_index(self, dates: list[str]) -> int:
        if self.split is None:
            return int(round(self.split_fraction * len(dates)))
        return sum(1 for d in dates if d < self.split)


@dataclasses.dataclass
class PipelineConfig:
    """Everything ``run`` needs; loaded from one JSON file.

    ``mode`` is ``simulate`` (sessions from ``simulation``) or ``ticks``
    (sessions from the tick CSV at ``ticks``).  Relative paths resolve
    against the config file's directory.
    """

    output: Path
    models: list[ModelSpec]
    mode: str = "simulate"
    ticks: Path | None = None
    instrument: str = ""
    calendar: SessionCalendar = dataclasses.field(default_factory=SessionCalendar)
    grid_seconds: int = 300
    estimator: EstimatorConfig = dataclasses.field(default_factory=EstimatorConfig)
    evaluation: EvaluationOptions = dataclasses.field(default_factory=EvaluationOptions)
    simulation: dict = dataclasses.field(default_factory=dict)
    seed: int = 0
    raw: dict = dataclasses.field(default_factory=dict, repr=False)

    @classmethod
    def from_dict(cls, d: dict, base: Path = Path("."), seed: int | None = None,
                  output: str | None = None) -> "PipelineConfig":
        if not isinstance(d, dict):
            raise ConfigError("config must be a JSON object")
        known = {"mode", "ticks", "instrument", "output", "calendar", "grid_seconds", "estimator",
                 "models", "evaluation", "simulation", "seed"}
        unknown = sorted(set(d) - known)
        if unknown:
            raise ConfigError(f"unknown config field(s) {', '.join(unknown)}")
        raw = json.loads(json.dumps(d))
        if seed is not None:
            raw["seed"] = seed
        if output is not None:
            raw["output"] = output
        specs = model_specs(raw.get("models", []))
        if not specs:
            raise ConfigError("config lists no models")
        mode = raw.get("mode", "simulate")
        if mode not in ("simulate", "ticks"):
            raise ConfigError(f"unknown mode {mode!r}")
        if "output" not in raw:
            raise ConfigError("config needs an output directory")
        ticks = None
        if mode == "ticks":
            if "ticks" not in raw:
                raise ConfigError("ticks mode needs a ticks path")
            ticks = (base / raw["ticks"]).resolve()
            if not ticks.is_file():
                raise ConfigError(f"tick file {ticks} not found")
        grid = raw.get("grid_seconds", 300)
        if not isinstance(grid, int) or grid <= 0:
            raise ConfigError("grid_seconds must be a positive integer")
        seed_v = raw.get("seed", 0)
        if not isinstance(seed_v, int) or seed_v < 0:
            raise ConfigError("seed must be a non-negative integer")
        cfg = cls(
            output=(base / raw["output"]).resolve(),
            models=specs,
            mode=mode,
            ticks=ticks,
            instrument=str(raw.get("instrument", "")),
            calendar=SessionCalendar.from_dict(raw.get("calendar", {})),
            grid_seconds=grid,
            estimator=estimator_config(raw.get("estimator")),
            evaluation=_dataclass_from(EvaluationOptions, raw.get("evaluation", {}), "evaluation"),
            simulation=dict(raw.get("simulation", {})),
            seed=seed_v,
            raw=raw,
        )
        if mode == "simulate":
            simulation_config(cfg.simulation, cfg.seed)
        return cfg

    @classmethod
    def from_json(cls, path, seed: int | None = None, output: str | None = None) -> "PipelineConfig":
        path = Path(path)
        return cls.from_dict(_read_json(path), path.parent, seed, output)

    def digest(self) -> str:
        """Hash of the effective config, independent of where it was run from."""
        canon = {k: v for k, v in self.raw.items() if k not in ("output", "ticks")}
        if self.ticks is not None:
            canon["ticks_sha256"] = _file_digest(self.ticks)
        return hashlib.sha256(json.dumps(canon, sort_keys=True).encode()).hexdigest()


def _file_digest(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for block in iter(lambda: fh.read(1 << 16), b""):
            h.update(block)
    return h.hexdigest()


# ---------------------------------------------------------------- stages

class StageError(Exception):
    def __init__(self, stage: str, cause: Exception):
        super().__init__(f"{stage}: {cause}")
        self.stage = stage
        self.cause = cause


@contextlib.contextmanager
def stage(name: str):
    logger.info("stage %s", name)
    try:
        yield
    except (WavevolError, OSError) as exc:
        raise StageError(name, exc) from exc


def _business_days(start: dt.date, n: int, cal: SessionCalendar) -> list[dt.date]:
    out, d = [], start
    while len(out) < n:
        if not cal.is_excluded(d):
            out.append(d)
        d += dt.timedelta(days=1)
    return out


def simulated_sessions(sim: SimConfig, start: dt.date, cal: SessionCalendar, grid_seconds: int):
    """Sessions and truth rows for simulated days on the calendar's trading dates."""
    days = simulate_days(sim)
    dates = _business_days(start, len(days), cal)
    step = grid_seconds * 1000
    sessions, truth = [], []
    for d, day in zip(dates, days):
        t0, _ = cal.bounds(d)
        stamps = t0 + step * np.arange(len(day.y), dtype=np.int64)
        sessions.append(TradingSession(d.isoformat(), stamps, day.y))
        truth.append([d.isoformat(), day.true_iv, day.true_jv, day.n_jumps])
    return sessions, truth


def estimate_sessions(sessions: list[TradingSession], est: EstimatorConfig) -> list[DailyMeasures]:
    return [estimate_day(s.log_prices, est, s.date) for s in sessions]


def _open_close(sessions) -> tuple[list[str], np.ndarray]:
    return [s.date for s in sessions], np.array([s.open_close_return for s in sessions])


def _component_rows(measures: list[DailyMeasures]):
    for m in measures:
        comp = ANNUALIZATION * np.asarray(m.components)
        total = ANNUALIZATION * m.jwtsrv
        yield [m.date, *comp, total, math.sqrt(max(total, 0.0))]


def run_pipeline(cfg: PipelineConfig) -> Path:
    """Run every stage and write the artifact tree; returns the output directory."""
    out = cfg.output
    for sub in ("sessions", "fits", "forecasts", "plotdata"):
        (out / sub).mkdir(parents=True, exist_ok=True)
    files = []

    with stage("sessions"):
        if cfg.mode == "simulate":
            sim, start = simulation_config(cfg.simulation, cfg.seed)
            sessions, truth = simulated_sessions(sim, start, cfg.calendar, cfg.grid_seconds)
            _write_csv(out / "sessions" / "truth.csv", ["date", "true_iv", "true_jv", "n_jumps"], truth)
            files.append("sessions/truth.csv")
        else:
            ticks = parse_ticks(cfg.ticks, cfg.instrument)
            sessions = sessionize(ticks, cfg.calendar, cfg.grid_seconds * 1000)
        if not sessions:
            raise DataError("no trading sessions")
        dates, returns = _open_close(sessions)
        write_sessions(sessions, out / "sessions" / "sessions.csv")
        write_returns(dates, returns, out / "sessions" / "returns.csv")
        files += ["sessions/sessions.csv", "sessions/returns.csv"]

    with stage("estimate"):
        measures = estimate_sessions(sessions, cfg.estimator)
        write_measures(measures, out / "measures.csv")
        files.append("measures.csv")
        bands = len(measures[0].components)
        _write_csv(out / "plotdata" / "components.csv",
                   ["date", *(f"var_c{j}" for j in range(1, bands + 1)), "total_var", "total_vol"],
                   _component_rows(measures))
        _write_csv(out / "plotdata" / "jumps.csv", ["date", "k", "jump_size", "threshold", "d_t"],
                   jump_rows(sessions, cfg.estimator.jump_wavelet))
        files += ["plotdata/components.csv", "plotdata/jumps.csv"]

    ev = cfg.evaluation
    split = ev.split_index(dates)
    fits, evals = [], {}
    for spec in cfg.models:
        label = spec.label
        data = ModelData.from_measures(dates, returns, measures, spec, target=ev.target)
        with stage(f"fit {label}"):
            f = fit(spec, data.slice(0, split), min_obs=ev.min_in_sample)
            _write_json(out / "fits" / f"{label}.json", f.to_dict())
            write_states(f, dates[:split], out / "fits" / f"{label}.states.csv")
            files += [f"fits/{label}.json", f"fits/{label}.states.csv"]
        fits.append(f)
        with stage(f"evaluate {label}"):
            records, report, _ = rolling_evaluate(
                spec, data, split, ev.scheme, ev.refit_every, fit_result=f,
                target_name=ev.target or "", min_in_sample=ev.min_in_sample,
                min_out_of_sample=ev.min_out_of_sample)
            write_forecasts(records, out / "forecasts" / f"{label}.csv")
            files.append(f"forecasts/{label}.csv")
        evals[label] = _report_dict(report)

    with stage("report"):
        comp = compare_models(fits)
        report = {
            "n_days": len(dates),
            "split_date": dates[split] if split < len(dates) else None,
            "n_in_sample": split,
            "models": {f.spec.label: {"loglik_joint": f.loglik_joint, "loglik_partial": f.loglik_partial,
                                      "n_params": f.n_params, "evaluation": evals[f.spec.label]}
                       for f in fits},
            "ranking": comp.ranking(),
            "lr_tests": [dataclasses.asdict(t) for t in comp.tests],
        }
        _write_json(out / "report.json", report)
        files.append("report.json")
        manifest = {
            "version": __version__,
            "config_sha256": cfg.digest(),
            "files": {p: _file_digest(out / p) for p in sorted(files)},
        }
        _write_json(out / "manifest.json", manifest)
    return out


# ---------------------------------------------------------------- subcommands

def _model_spec(args) -> ModelSpec:
    family = args.model
    if args.scale is not None:
        family = "realized_jgarch_scale"
    elif args.jumps and family == "realized_garch":
        family = "realized_jgarch"
    try:
        return ModelSpec(family, args.measure, args.scale)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc


def _aligned_inputs(returns_path, measures_path):
    dates, returns = read_returns(returns_path)
    measures = read_measures(measures_path)
    mdates = [m.date for m in measures]
    if mdates != dates:
        raise AlignmentError(f"{returns_path} and {measures_path} cover different dates")
    return dates, returns, measures


def cmd_simulate(args) -> None:
    d = _read_json(args.config) if args.config else {}
    cal = SessionCalendar.from_dict(d.pop("calendar", {}))
    sim, start = simulation_config(d, args.seed)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    sessions, truth = simulated_sessions(sim, start, cal, args.grid_seconds)
    write_sessions(sessions, out / "sessions.csv")
    write_returns(*_open_close(sessions), out / "returns.csv")
    _write_csv(out / "truth.csv", ["date", "true_iv", "true_jv", "n_jumps"], truth)


def cmd_ingest(args) -> None:
    cal = SessionCalendar.from_json(args.config) if args.config else SessionCalendar()
    ticks = parse_ticks(args.ticks, args.instrument)
    sessions = sessionize(ticks, cal, args.grid_seconds * 1000)
    if not sessions:
        raise DataError("no trading sessions")
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    write_sessions(sessions, out / "sessions.csv")
    write_returns(*_open_close(sessions), out / "returns.csv")


def _estimator_from(args) -> EstimatorConfig:
    return estimator_config(_read_json(args.config) if args.config else None)


def cmd_estimate(args) -> None:
    measures = estimate_sessions(read_sessions(args.sessions), _estimator_from(args))
    write_measures(measures, args.out, annualize=args.annualize)


def cmd_jumps(args) -> None:
    est = _estimator_from(args)
    _write_csv(args.out, ["date", "k", "jump_size", "threshold", "d_t"],
               jump_rows(read_sessions(args.sessions), est.jump_wavelet))


def cmd_fit(args) -> None:
    spec = _model_spec(args)
    dates, returns, measures = _aligned_inputs(args.returns, args.measures)
    data = ModelData.from_measures(dates, returns, measures, spec)
    f = fit(spec, data, min_obs=args.min_obs)
    _write_json(args.out, f.to_dict())
    if args.states:
        write_states(f, dates, args.states)


def cmd_evaluate(args) -> None:
    d = _read_json(args.fit)
    try:
        spec = ModelSpec.from_dict(d["spec"])
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigError(f"{args.fit}: not a fit artifact ({exc})") from exc
    dates, returns, measures = _aligned_inputs(args.returns, args.measures)
    data = ModelData.from_measures(dates, returns, measures, spec, target=args.target)
    f = FitResult.from_dict(d)
    split = sum(1 for x in dates if x < args.split)
    records, report, _ = rolling_evaluate(spec, data, split, args.scheme, args.refit_every, fit_result=f,
                                          target_name=args.target or "", min_in_sample=args.min_obs)
    _write_json(args.out, _report_dict(report))
    if args.forecasts:
        write_forecasts(records, args.forecasts)


def cmd_run(args) -> None:
    cfg = PipelineConfig.from_json(args.config, seed=args.seed, output=args.out)
    run_pipeline(cfg)


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="wavevol", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=f"wavevol {__version__}")
    p.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("simulate", help="simulate intraday sessions")
    s.add_argument("--config", help="JSON with simulation fields, optional vol, start_date and calendar")
    s.add_argument("--seed", type=int)
    s.add_argument("--grid-seconds", type=int, default=300)
    s.add_argument("-o", "--out", required=True, help="output directory")
    s.set_defaults(func=cmd_simulate)

    s = sub.add_parser("ingest", help="clean ticks and sample sessions on a regular grid")
    s.add_argument("ticks", help="tick CSV with header timestamp_ms,price")
    s.add_argument("--config", help="session calendar JSON")
    s.add_argument("--instrument", default="")
    s.add_argument("--grid-seconds", type=int, default=300)
    s.add_argument("-o", "--out", required=True, help="output directory")
    s.set_defaults(func=cmd_ingest)

    for name, func, text in (("estimate", cmd_estimate, "daily realized measures"),
                             ("jumps", cmd_jumps, "flagged intraday jumps")):
        s = sub.add_parser(name, help=text)
        s.add_argument("sessions", help="session CSV")
        s.add_argument("--config", help="estimator settings JSON")
        s.add_argument("-o", "--out", required=True, help="output CSV")
        if name == "estimate":
            s.add_argument("--annualize", action="store_true", help="report sqrt(252 * variance)")
        s.set_defaults(func=func)

    s = sub.add_parser("fit", help="estimate a GARCH-type model")
    s.add_argument("returns", help="daily returns CSV")
    s.add_argument("measures", help="daily measures CSV")
    s.add_argument("--model", default="realized_garch",
                   choices=["garch", "realized_garch", "realized_jgarch", "realized_jgarch_scale"])
    s.add_argument("--measure", default="jwtsrv", choices=list(DailyMeasures.MEASURES))
    s.add_argument("--scale", type=int, help="JWTSRV band for the per-scale jump model")
    s.add_argument("--jumps", action="store_true", help="add log(1 + JV) to the variance equation")
    s.add_argument("--min-obs", type=int, default=100)
    s.add_argument("-o", "--out", required=True, help="fit artifact JSON")
    s.add_argument("--states", help="filtered states CSV")
    s.set_defaults(func=cmd_fit)

    s = sub.add_parser("evaluate", help="out-of-sample one-step forecasts")
    s.add_argument("fit", help="fit artifact JSON")
    s.add_argument("returns", help="daily returns CSV")
    s.add_argument("measures", help="daily measures CSV")
    s.add_argument("--split", required=True, help="first out-of-sample date (ISO)")
    s.add_argument("--scheme", default="fixed-params", choices=["fixed-params", "re-estimate"])
    s.add_argument("--refit-every", type=int, default=20)
    s.add_argument("--target", choices=list(DailyMeasures.MEASURES), help="variance proxy (default: model measure)")
    s.add_argument("--min-obs", type=int, default=100)
    s.add_argument("-o", "--out", required=True, help="report JSON")
    s.add_argument("--forecasts", help="per-day forecast CSV")
    s.set_defaults(func=cmd_evaluate)

    s = sub.add_parser("run", help="full pipeline from a JSON config")
    s.add_argument("--config", required=True)
    s.add_argument("--seed", type=int, help="override the config seed")
    s.add_argument("-o", "--out", help="override the output directory")
    s.set_defaults(func=cmd_run)
    return p


def _exit_code(exc: BaseException) -> int:
    if isinstance(exc, ConfigError):
        return EXIT_CONFIG
    if isinstance(exc, NumericError):
        return EXIT_NUMERIC
    return EXIT_DATA


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)
    try:
        args.func(args)
    except StageError as exc:
        print(f"wavevol {args.command}: stage {exc.stage} failed: {exc.cause}", file=sys.stderr)
        return _exit_code(exc.cause)
    except WavevolError as exc:
        print(f"wavevol {args.command}: {exc}", file=sys.stderr)
        return _exit_code(exc)
    except OSError as exc:
        print(f"wavevol {args.command}: {exc}", file=sys.stderr)
        return EXIT_DATA
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
