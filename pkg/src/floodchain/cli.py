"""Command line front end.

Every subcommand writes CSV/JSON results plus ``manifest.json`` into the
output directory. A flat INI file (``--config``) can supply any option;
its ``[run]`` section uses the long option names (``n_chains = 50``) and
``[station:<id>]`` sections give per-station thresholds for ``evaluate``.
Explicit flags override the file.

Exit codes: 0 success, 1 usage or input error, 2 numerical failure.
"""

from __future__ import annotations

import argparse
import configparser
import csv
import hashlib
import json
import logging
import math
import os
import platform
import sys
import time
from pathlib import Path

import numpy as np
import scipy

from . import __version__
from .dependence import FAMILIES, make_model
from .diagnostics import CURVE_COLUMNS, acf_pacf, chi_curve
from .errors import InputError, NumericalError
from .evaluation import ExperimentConfig, run_experiment
from .exindex import ferro_segers, theta_pipeline
from .hydrograph import extract_annual_events, simulated_durations, summarize
from .likelihood import MarkovModel, fit_markov
from .marginal import GpdParams
from .quantiles import DEFAULT_PERIODS, POT_ESTIMATORS, ReturnSpec, fit_pot, return_level_markov
from .series import DAYS_PER_YEAR, exceedances, parse_series, resolve_threshold
from .simulate import SimConfig, simulate_chain

log = logging.getLogger("floodchain")

EXIT_OK, EXIT_USAGE, EXIT_NUMERICAL = 0, 1, 2


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


# -- formatting ---------------------------------------------------------------


def fmt(x) -> str:
    if isinstance(x, (bool, np.bool_)):
        return str(int(x))
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, (float, np.floating)):
        return "" if math.isnan(x) else format(float(x), ".17g")
    return "" if x is None else str(x)


def write_csv(path: Path, header, rows):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([fmt(v) for v in row])


def _jsonable(x):
    if isinstance(x, dict):
        return {str(k): _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_jsonable(v) for v in x]
    if isinstance(x, (np.integer,)):
        return int(x)
    if isinstance(x, (float, np.floating)):
        x = float(x)
        return None if math.isnan(x) else x
    return x


def write_json(path: Path, obj):
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        json.dump(_jsonable(obj), fh, indent=2, sort_keys=True, ensure_ascii=False)
        fh.write("\n")


# -- option handling ----------------------------------------------------------

# option -> (type, built-in default); None-valued flags are filled from the
# config file first, then from these defaults
DEFAULTS = {
    "input": (str, None),
    "station": (str, None),
    "threshold": (str, "q:0.9"),
    "family": (str, "amix"),
    "model": (str, None),
    "seed": (int, 0),
    "n_chains": (int, 100),
    "chain_len": (int, 2000),
    "burn_in": (int, 100),
    "periods": (str, ",".join(str(t) for t in DEFAULT_PERIODS)),
    "obs_per_year": (float, DAYS_PER_YEAR),
    "method": (str, None),
    "estimator": (str, "mle"),
    "decluster": (str, "runs"),
    "run_gap": (int, 2),
    "omegas": (str, "0.8,0.85,0.9,0.95,0.96,0.97,0.98,0.985,0.99"),
    "block_len": (int, 30),
    "n_boot": (int, 500),
    "level": (float, 0.95),
    "max_lag": (int, 10),
    "bins": (int, 10),
    "half_width": (int, 15),
    "stations": (str, None),
    "window_years": (str, "5,10,15,20"),
    "families": (str, ",".join(FAMILIES)),
    "estimators": (str, ",".join(POT_ESTIMATORS)),
}

# per-command defaults that differ from the global table
COMMAND_DEFAULTS = {
    "theta": {"method": "pipeline"},
    "quantile": {"method": "markov"},
    "evaluate": {"n_chains": 20, "chain_len": 1000},
    "duration": {"n_chains": 20, "chain_len": 7306},
}


def _add(p, name, help_text, **kw):
    p.add_argument("--" + name.replace("_", "-"), dest=name, default=None, help=help_text, **kw)


def _model_opts(p):
    _add(p, "input", "daily discharge CSV (date,discharge)")
    _add(p, "station", "station id (default: input file stem)")
    _add(p, "threshold", "absolute threshold or q:<p> (default q:0.9)")
    _add(p, "family", "dependence family: " + ", ".join(FAMILIES))
    _add(p, "model", "fitted model JSON from `fit` instead of fitting --input")


def _sim_opts(p):
    _add(p, "n_chains", "number of simulated chains")
    _add(p, "chain_len", "steps kept per chain")
    _add(p, "burn_in", "steps discarded per chain")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="floodchain", description="Markov chain models for daily flood exceedances.")
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", parser_class=_Parser)

    def command(name, help_text):
        p = sub.add_parser(name, help=help_text)
        p.add_argument("--config", default=None, help="INI file with a [run] section")
        p.add_argument("--output", default=".", help="output directory (default: current)")
        _add(p, "seed", "random seed")
        return p

    p = command("fit", "fit a Markov chain model by censored likelihood")
    _model_opts(p)

    p = command("simulate", "simulate chains from a fitted model")
    _model_opts(p)
    _sim_opts(p)

    p = command("theta", "extremal index by simulation or from the data")
    _model_opts(p)
    _sim_opts(p)
    _add(p, "method", "pipeline (simulate the fitted model) or intervals (data only)")
    _add(p, "bins", "histogram bins for per-chain estimates")

    p = command("quantile", "return levels")
    _model_opts(p)
    _sim_opts(p)
    _add(p, "periods", "comma-separated return periods in years")
    _add(p, "obs_per_year", "observations per year")
    _add(p, "method", "markov or pot")
    _add(p, "estimator", "pot estimator: mle, pwu or pwb")
    _add(p, "decluster", "runs or intervals")
    _add(p, "run_gap", "runs declustering gap in days")

    p = command("diagnose", "chi/chibar curves and autocorrelations")
    _add(p, "input", "daily discharge CSV")
    _add(p, "omegas", "comma-separated levels in (0, 1)")
    _add(p, "block_len", "bootstrap block length in days")
    _add(p, "n_boot", "bootstrap replicates")
    _add(p, "level", "confidence level")
    _add(p, "max_lag", "largest autocorrelation lag")

    p = command("evaluate", "benchmark estimators on sub-series")
    _add(p, "stations", "comma-separated station CSV files")
    _add(p, "threshold", "default threshold for stations without their own")
    _add(p, "window_years", "comma-separated window lengths")
    _add(p, "families", "comma-separated Markov families")
    _add(p, "estimators", "comma-separated POT estimators")
    _add(p, "periods", "comma-separated return periods")
    _add(p, "decluster", "runs or intervals")
    _add(p, "run_gap", "runs declustering gap")
    _add(p, "obs_per_year", "observations per year")
    _sim_opts(p)

    p = command("duration", "flood durations, observed and simulated")
    _model_opts(p)
    _sim_opts(p)
    _add(p, "half_width", "days kept on each side of the annual peak")

    p = sub.add_parser("rerun", help="repeat a run recorded in a manifest")
    p.add_argument("--manifest", required=True)
    p.add_argument("--output", default=".")
    return parser


def _read_config(path):
    if path is None:
        return None
    if not os.path.isfile(path):
        raise InputError(f"config file not found: {path}")
    cp = configparser.ConfigParser(interpolation=None)
    try:
        cp.read(path, encoding="utf-8")
    except configparser.Error as exc:
        raise InputError(f"cannot parse config {path}: {exc}") from None
    return cp


def resolve_options(args, config) -> dict:
    """Flags, then the config's [run] section, then defaults."""
    section = config["run"] if config is not None and config.has_section("run") else {}
    known = set(DEFAULTS)
    for key in section:
        if key not in known:
            raise InputError(f"unknown config key '{key}' in [run]")
    defaults = {**{k: d for k, (_, d) in DEFAULTS.items()}, **COMMAND_DEFAULTS.get(args.command, {})}
    opts = {}
    for name, (typ, _) in DEFAULTS.items():
        if not hasattr(args, name):
            continue
        value = getattr(args, name)
        if value is None and name in section:
            value = section[name]
        if value is None:
            value = defaults[name]
        if value is not None:
            try:
                value = typ(value)
            except ValueError:
                raise InputError(f"--{name.replace('_', '-')}: expected {typ.__name__}, got {value!r}") from None
        opts[name] = value
    return opts


def _floats(text, name):
    try:
        return [float(t) for t in str(text).split(",") if t.strip()]
    except ValueError:
        raise InputError(f"--{name}: expected comma-separated numbers, got {text!r}") from None


def _names(text):
    return [t.strip() for t in str(text).split(",") if t.strip()]


def _load_series(path, station=None):
    if path is None:
        raise InputError("--input is required")
    if not os.path.isfile(path):
        raise InputError(f"input file not found: {path}")
    with open(path, encoding="utf-8", newline="") as fh:
        return parse_series(fh, station or Path(path).stem)


def _sha256(path):
    with open(path, "rb") as fh:
        return hashlib.sha256(fh.read()).hexdigest()


# -- model handling -----------------------------------------------------------


def model_to_dict(model: MarkovModel, extra=None) -> dict:
    p = model.marginal
    out = {
        "family": model.dep.family,
        "u": p.u,
        "lambda": p.lam,
        "sigma": p.sigma,
        "xi": p.xi,
        "dependence": model.dep.params(),
        "extremal_index": model.theta,
    }
    out.update(extra or {})
    return out


def model_from_dict(d: dict) -> MarkovModel:
    try:
        marginal = GpdParams(float(d["u"]), float(d["lambda"]), float(d["sigma"]), float(d["xi"]))
        dep = make_model(d["family"], **d["dependence"]).validate()
    except (KeyError, TypeError, ValueError) as exc:
        raise InputError(f"invalid model description: {exc}") from None
    theta = d.get("extremal_index")
    return MarkovModel(marginal, dep, None if theta is None else float(theta))


def _check_family(family):
    if family not in FAMILIES:
        raise InputError(f"unknown family {family!r}; choose one of {', '.join(FAMILIES)}")


def obtain_model(opts, inputs) -> MarkovModel:
    if opts.get("model"):
        path = opts["model"]
        if not os.path.isfile(path):
            raise InputError(f"model file not found: {path}")
        with open(path, encoding="utf-8") as fh:
            try:
                d = json.load(fh)
            except json.JSONDecodeError as exc:
                raise InputError(f"model file is not valid JSON: {exc}") from None
        inputs[path] = _sha256(path)
        return model_from_dict(d)
    _check_family(opts["family"])
    series = _load_series(opts["input"], opts.get("station"))
    inputs[opts["input"]] = _sha256(opts["input"])
    u = resolve_threshold(series, opts["threshold"])
    return fit_markov(series, u, opts["family"], seed=opts["seed"]).model


def _sim_config(opts) -> SimConfig:
    try:
        return SimConfig(opts["n_chains"], opts["chain_len"], opts["seed"], opts["burn_in"])
    except ValueError as exc:
        raise InputError(str(exc)) from None


# -- subcommands --------------------------------------------------------------


def cmd_fit(opts, out: Path, inputs):
    _check_family(opts["family"])
    series = _load_series(opts["input"], opts.get("station"))
    inputs[opts["input"]] = _sha256(opts["input"])
    u = resolve_threshold(series, opts["threshold"])
    rep = fit_markov(series, u, opts["family"], seed=opts["seed"])
    result = model_to_dict(rep.model, {
        "station": series.station_id,
        "loglik": rep.loglik,
        "converged": rep.converged,
        "n_iter": rep.n_iter,
        "n_eval": rep.n_eval,
        "n_exceed": rep.n_exceed,
        "n_observed": rep.n_observed,
        "simplex_spread": rep.simplex_spread,
    })
    write_json(out / "fit.json", result)
    return ["fit.json"]


def cmd_simulate(opts, out: Path, inputs):
    model = obtain_model(opts, inputs)
    sims = simulate_chain(model, _sim_config(opts))
    rows = (
        (c, t, bool(sims.exceeds[c, t]), sims.values[c, t])
        for c in range(sims.n_chains)
        for t in range(sims.z.shape[1])
    )
    write_csv(out / "chains.csv", ["chain_id", "step", "exceeds", "value"], rows)
    return ["chains.csv"]


def cmd_theta(opts, out: Path, inputs):
    method = opts["method"]
    if method == "intervals":
        series = _load_series(opts["input"], opts.get("station"))
        inputs[opts["input"]] = _sha256(opts["input"])
        u = resolve_threshold(series, opts["threshold"])
        est = ferro_segers(exceedances(series, u))
    elif method == "pipeline":
        est = theta_pipeline(obtain_model(opts, inputs), _sim_config(opts))
    else:
        raise InputError(f"unknown theta method {method!r}; use pipeline or intervals")
    write_csv(out / "theta.csv", ["theta", "N", "method", "n_chains_used", "n_chains_skipped"],
              [(est.theta, est.N, est.method, est.per_chain.size, est.n_skipped)])
    files = ["theta.csv"]
    if est.per_chain.size:
        counts, edges = est.histogram(opts["bins"])
        write_csv(out / "theta_hist.csv", ["bin_lo", "bin_hi", "count"], zip(edges[:-1], edges[1:], counts))
        write_csv(out / "theta_chains.csv", ["chain", "theta"], enumerate(est.per_chain))
        files += ["theta_hist.csv", "theta_chains.csv"]
    return files


def cmd_quantile(opts, out: Path, inputs):
    periods = _floats(opts["periods"], "periods")
    specs = []
    try:
        specs = [ReturnSpec(T, opts["obs_per_year"]) for T in periods]
    except ValueError as exc:
        raise InputError(str(exc)) from None
    method = opts["method"]
    if method == "markov":
        model = obtain_model(opts, inputs)
        if model.theta is None:
            model = model.with_theta(theta_pipeline(model, _sim_config(opts)).theta)
        levels = [return_level_markov(model, s) for s in specs]
        header = ["T", "Q_T", "theta"]
        rows = [(s.T, q, model.theta) for s, q in zip(specs, levels)]
    elif method == "pot":
        series = _load_series(opts["input"], opts.get("station"))
        inputs[opts["input"]] = _sha256(opts["input"])
        u = resolve_threshold(series, opts["threshold"])
        try:
            pot = fit_pot(series, u, opts["estimator"], opts["decluster"], opts["run_gap"], opts["obs_per_year"])
        except ValueError as exc:
            if isinstance(exc, NumericalError):
                raise
            raise InputError(str(exc)) from None
        header = ["T", "Q_T", "cluster_rate"]
        rows = [(s.T, pot.return_level(s), pot.cluster_rate) for s in specs]
    else:
        raise InputError(f"unknown quantile method {method!r}; use markov or pot")
    write_csv(out / "quantiles.csv", header, rows)
    return ["quantiles.csv"]


def cmd_diagnose(opts, out: Path, inputs):
    series = _load_series(opts["input"])
    inputs[opts["input"]] = _sha256(opts["input"])
    omegas = _floats(opts["omegas"], "omegas")
    if any(not 0 < w < 1 for w in omegas):
        raise InputError("--omegas must lie in (0, 1)")
    try:
        curve = chi_curve(series, omegas, opts["block_len"], opts["n_boot"], opts["level"], opts["seed"])
        r, pc = acf_pacf(series, opts["max_lag"])
    except ValueError as exc:
        if isinstance(exc, NumericalError):
            raise
        raise InputError(str(exc)) from None
    write_csv(out / "chi_curve.csv", CURVE_COLUMNS, curve.rows())
    write_csv(out / "acf.csv", ["lag", "acf", "pacf"], zip(range(r.size), r, pc))
    return ["chi_curve.csv", "acf.csv"]


def cmd_evaluate(opts, out: Path, inputs, config):
    paths = _names(opts["stations"] or "")
    if not paths:
        raise InputError("evaluate needs --stations or 'stations' in the config")
    stations = []
    for path in paths:
        stations.append(_load_series(path))
        inputs[path] = _sha256(path)
    thresholds = {}
    if config is not None:
        for name in config.sections():
            if name.startswith("station:"):
                sid = name.split(":", 1)[1]
                if "threshold" not in config[name]:
                    raise InputError(f"[{name}] needs a threshold")
                thresholds[sid] = config[name]["threshold"]
    families = _names(opts["families"])
    for f in families:
        _check_family(f)
    estimators = _names(opts["estimators"])
    for e in estimators:
        if e not in POT_ESTIMATORS:
            raise InputError(f"unknown estimator {e!r}")
    cfg = ExperimentConfig(
        thresholds=thresholds,
        default_threshold=opts["threshold"],
        window_years=tuple(int(w) for w in _floats(opts["window_years"], "window-years")),
        families=tuple(families),
        pot_estimators=tuple(estimators),
        periods=tuple(_floats(opts["periods"], "periods")),
        decluster=opts["decluster"],
        run_gap=opts["run_gap"],
        n_chains=opts["n_chains"],
        chain_len=opts["chain_len"],
        burn_in=opts["burn_in"],
        obs_per_year=opts["obs_per_year"],
        seed=opts["seed"],
    )
    result = run_experiment(stations, cfg)
    rows = []
    for r in result.reports():
        s = r.score
        vals = (s.n, s.nbias, s.var, s.nmse, s.se_nbias, s.se_var, s.se_nmse) if s else (r.estimates.size,) + (math.nan,) * 6
        rows.append((r.estimator, r.window_years, r.T, *vals, r.n_failed, r.failure_rate))
    write_csv(out / "scores.csv", ["estimator", "window_years", "T", "n", "nbias", "var", "nmse",
                                   "se_nbias", "se_var", "se_nmse", "n_failed", "failure_rate"], rows)
    write_csv(out / "estimates.csv", ["station", "window_years", "start_year", "estimator", "T",
                                      "estimate", "benchmark", "error"],
              ((r.station, r.window_years, r.start_year, r.estimator, r.T, r.estimate, r.benchmark, r.error)
               for r in result.rows))
    return ["scores.csv", "estimates.csv"]


def cmd_duration(opts, out: Path, inputs):
    _check_family(opts["family"])
    series = _load_series(opts["input"], opts.get("station"))
    inputs[opts["input"]] = _sha256(opts["input"])
    w = opts["half_width"]
    observed = summarize(extract_annual_events(series, w))
    if opts.get("model"):
        model = obtain_model(opts, inputs)
    else:
        u = resolve_threshold(series, opts["threshold"])
        model = fit_markov(series, u, opts["family"], seed=opts["seed"]).model
    simulated = simulated_durations(model, _sim_config(opts), w)
    write_csv(out / "duration_curves.csv", ["day", "observed", "simulated"],
              zip(range(-w, w + 1), observed.curve, simulated.curve))
    rows = [
        ("observed", observed.d_mean, observed.d_med, observed.n_events, observed.n_dropped),
        ("simulated", simulated.d_mean, simulated.d_med, simulated.n_events, simulated.n_dropped),
        ("nbias",
         (simulated.d_mean - observed.d_mean) / observed.d_mean if observed.d_mean else math.nan,
         (simulated.d_med - observed.d_med) / observed.d_med if observed.d_med else math.nan, "", ""),
    ]
    write_csv(out / "durations.csv", ["source", "d_mean", "d_med", "n_events", "n_dropped"], rows)
    return ["duration_curves.csv", "durations.csv"]


COMMANDS = {
    "fit": cmd_fit,
    "simulate": cmd_simulate,
    "theta": cmd_theta,
    "quantile": cmd_quantile,
    "diagnose": cmd_diagnose,
    "duration": cmd_duration,
}


def _versions():
    return {"floodchain": __version__, "numpy": np.__version__, "scipy": scipy.__version__,
            "python": platform.python_version()}


def _execute(argv) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.command is None:
        raise UsageError("a subcommand is required (fit, simulate, theta, quantile, diagnose, evaluate, duration)")
    if args.command == "rerun":
        if not os.path.isfile(args.manifest):
            raise InputError(f"manifest not found: {args.manifest}")
        with open(args.manifest, encoding="utf-8") as fh:
            try:
                recorded = json.load(fh)["argv"]
            except (json.JSONDecodeError, KeyError):
                raise InputError("manifest has no recorded argv") from None
        return _execute(list(recorded) + ["--output", args.output])

    config = _read_config(args.config)
    opts = resolve_options(args, config)
    out = Path(args.output)
    out.mkdir(parents=True, exist_ok=True)
    inputs = {}
    if args.config:
        inputs[args.config] = _sha256(args.config)
    started = time.perf_counter()
    if args.command == "evaluate":
        files = cmd_evaluate(opts, out, inputs, config)
    else:
        files = COMMANDS[args.command](opts, out, inputs)

    # the recorded argv omits --output so a manifest can be replayed anywhere
    argv_rec = []
    skip = False
    for a in argv:
        if skip:
            skip = False
            continue
        if a == "--output":
            skip = True
            continue
        if a.startswith("--output="):
            continue
        argv_rec.append(a)
    write_json(out / "manifest.json", {
        "command": args.command,
        "argv": argv_rec,
        "options": opts,
        "inputs": inputs,
        "outputs": files,
        "seed": opts.get("seed"),
        "versions": _versions(),
        "wall_time_s": round(time.perf_counter() - started, 3),
    })
    return EXIT_OK


def main(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    logging.basicConfig(level=logging.WARNING, format="%(levelname)s: %(message)s")
    try:
        return _execute(argv)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except InputError as exc:
        print(f"input error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except NumericalError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except OSError as exc:
        print(f"input error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
