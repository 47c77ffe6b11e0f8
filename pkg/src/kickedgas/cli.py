"""Command-line front end: run / sweep / predict / compare.

Configuration files are flat JSON mirroring SimConfig; every key can be
overridden by a flag.  Artifacts are plain CSV (header row, '.' decimal
separator, repr-precision floats so parsing recovers values exactly) plus a
manifest with content digests sufficient to reproduce the run bit-exactly.

Exit codes: 0 success / comparison passed, 1 comparison failed,
2 configuration error, 3 numeric abort (grid too small), 4 fit refusal.
"""

from __future__ import annotations

import argparse
import csv
import datetime as _dt
import hashlib
import json
import math
import os
import sys
from typing import Optional

import numpy as np

from . import __version__, predictions
from .dynamics import ConfigError, PhaseConstraint, SimConfig
from .ensemble import InvalidEnsembleError, run_ensemble, run_sweep, SweepPlan
from .observables import FitRefusedError, amplitude_histogram
from .precision import ScalarContext

EXIT_OK = 0
EXIT_COMPARE_FAIL = 1
EXIT_CONFIG = 2
EXIT_NUMERIC = 3
EXIT_FIT = 4

#: default profile snapshot times (geometric, capped at the horizon)
SNAPSHOT_LADDER = (1, 2, 5, 10, 20, 50, 100, 200, 500, 1000, 2000, 5000)

CONFIG_KEYS = {
    "gamma_star": float,
    "kick": str,
    "f": float,
    "lambda": float,
    "ns": int,
    "ds": float,
    "horizon": int,
    "nr": int,
    "nd": int,
    "seed": int,
    "edge_policy": str,
    "batch": int,
    "snapshots": list,
    "hist": list,
    "probes": list,
    "constraint_q": int,
}


def _fmt(x) -> str:
    """Shortest decimal that round-trips the float exactly."""
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return repr(float(x))


def load_config(path: str, overrides: Optional[dict] = None) -> dict:
    with open(path) as fh:
        raw = json.load(fh)
    if not isinstance(raw, dict):
        raise ConfigError("config must be a JSON object")
    unknown = set(raw) - set(CONFIG_KEYS)
    if unknown:
        raise ConfigError(f"unknown config keys: {sorted(unknown)}")
    for key, caster in CONFIG_KEYS.items():
        if key in raw and caster in (int, float) and raw[key] is not None:
            raw[key] = caster(raw[key])
    if overrides:
        raw.update({k: v for k, v in overrides.items() if v is not None})
    return raw


def build_sim(raw: dict) -> SimConfig:
    nd = raw.get("nd")
    scalar = (
        ScalarContext.double()
        if nd is None or int(nd) == 15
        else ScalarContext.arbitrary(int(nd))
    )
    try:
        return SimConfig(
            gamma_star=float(raw["gamma_star"]),
            lam=float(raw["lambda"]),
            n_s=int(raw["ns"]),
            horizon=int(raw["horizon"]),
            n_r=int(raw["nr"]),
            seed=int(raw.get("seed", 0)),
            kick=raw.get("kick", "delta"),
            f=(float(raw["f"]) if raw.get("f") is not None else None),
            delta_s=float(raw.get("ds", 1.0 / 500.0)),
            scalar=scalar,
            edge_policy=raw.get("edge_policy", "abort"),
            batch_size=int(raw.get("batch", 64)),
        )
    except KeyError as exc:
        raise ConfigError(f"missing config key: {exc.args[0]}") from exc


def _sha256(path: str) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for block in iter(lambda: fh.read(1 << 20), b""):
            h.update(block)
    return "sha256:" + h.hexdigest()


def _write_timeseries(path, stats):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["t", "sigma2", "sigma2_sd", "condensate", "ipr"])
        sd = stats.sd_sigma() if stats.count >= 2 else np.full(len(stats.times), math.nan)
        iprs = stats.ipr()
        for i, t in enumerate(stats.times):
            w.writerow([
                int(t),
                _fmt(stats.mean["sigma2"][i]),
                _fmt(sd[i]),
                _fmt(stats.mean["condensate"][i]),
                _fmt(iprs[i]),
            ])


def _write_profiles(path, stats, n_s):
    qs = np.arange(-(n_s // 2), n_s // 2)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["t", "q", "mean_population"])
        for t in sorted(stats.profile_sum):
            prof = stats.mean_profile(t)
            for q, p in zip(qs, prof):
                w.writerow([int(t), int(q), _fmt(p)])


def _write_histograms(path, stats):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["q", "t", "bin_left", "bin_right", "count",
                    "density", "rho_bar", "ks_p"])
        for (q, t) in sorted(stats.hist_samples):
            samples = stats.samples(q, t)
            try:
                h = amplitude_histogram(samples)
            except FitRefusedError:
                continue
            for i in range(len(h.counts)):
                w.writerow([
                    int(q), int(t),
                    _fmt(h.bin_edges[i]), _fmt(h.bin_edges[i + 1]),
                    int(h.counts[i]), _fmt(h.density[i]),
                    _fmt(h.rho_bar), _fmt(h.ks_p),
                ])


def cmd_run(args) -> int:
    raw = load_config(args.config, _cli_overrides(args))
    config = build_sim(raw)
    outdir = args.out
    os.makedirs(outdir, exist_ok=True)
    snapshots = raw.get("snapshots")
    if snapshots is None:
        snapshots = [t for t in SNAPSHOT_LADDER if t <= config.horizon]
    hist_pairs = [tuple(pair) for pair in raw.get("hist", [])]
    probes = tuple(raw.get("probes", ("sigma2", "condensate", "ipr_moment")))
    constraint = None
    if raw.get("constraint_q"):
        constraint = PhaseConstraint.modes_below(
            int(raw["constraint_q"]), config.gamma_star
        )
    started = _dt.datetime.now(_dt.timezone.utc).isoformat()
    stats = run_ensemble(
        config,
        constraint=constraint,
        probes=probes,
        snapshot_times=snapshots,
        hist_snapshots=hist_pairs,
        progress=not args.quiet,
    )
    finished = _dt.datetime.now(_dt.timezone.utc).isoformat()

    files = {}
    ts_path = os.path.join(outdir, "timeseries.csv")
    _write_timeseries(ts_path, stats)
    files["timeseries.csv"] = _sha256(ts_path)
    if stats.profile_sum:
        p_path = os.path.join(outdir, "profiles.csv")
        _write_profiles(p_path, stats, config.n_s)
        files["profiles.csv"] = _sha256(p_path)
    if stats.hist_samples:
        h_path = os.path.join(outdir, "histograms.csv")
        _write_histograms(h_path, stats)
        files["histograms.csv"] = _sha256(h_path)

    manifest = {
        "version": __version__,
        "config": {k: raw.get(k) for k in sorted(raw)},
        "seed": config.seed,
        "started": started,
        "finished": finished,
        "completed": stats.count,
        "aborted": stats.aborted,
        "outputs": files,
    }
    with open(os.path.join(outdir, "manifest.json"), "w") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")
    if not args.quiet:
        print(f"wrote {len(files) + 1} artifacts to {outdir}")
    return EXIT_OK


def _cli_overrides(args) -> dict:
    over = {
        "gamma_star": args.gamma_star,
        "f": args.f,
        "lambda": getattr(args, "lambda_"),
        "ns": args.ns,
        "ds": args.ds,
        "horizon": args.horizon,
        "nr": args.nr,
        "nd": args.nd,
        "seed": args.seed,
        "kick": args.kick,
    }
    return over


def cmd_predict(args) -> int:
    g = args.gamma_star
    lam = getattr(args, "lambda_")
    q = args.q
    w = csv.writer(sys.stdout)
    name = args.quantity
    if name == "t_E":
        w.writerow(["quantity", "gamma_star", "lambda", "value"])
        w.writerow(["t_E", _fmt(g), _fmt(lam), _fmt(predictions.ehrenfest_time(g, lam))])
    elif name == "t_q":
        w.writerow(["quantity", "q", "gamma_star", "lambda", "value"])
        w.writerow(["t_q", q, _fmt(g), _fmt(lam),
                    _fmt(predictions.mode_depletion_time(q, g, lam))])
    elif name == "tau":
        w.writerow(["quantity", "gamma_star", "lambda", "value"])
        w.writerow(["tau", _fmt(g), _fmt(lam), _fmt(predictions.tau_depletion(g, lam))])
    elif name == "t_f":
        w.writerow(["quantity", "gamma_star", "lambda", "f", "value"])
        w.writerow(["t_f", _fmt(g), _fmt(lam), _fmt(args.f),
                    _fmt(predictions.delta_breakdown_time(g, lam, args.f))])
    elif name == "psi1":
        w.writerow(["quantity", "t", "closed_form", "quadrature"])
        for t in args.t:
            w.writerow([
                "psi1", _fmt(t),
                _fmt(float(predictions.psi1_closed(t, g, lam))),
                _fmt(predictions.psi1_quadrature(int(t), g, lam)),
            ])
    elif name == "sigma2_delta":
        w.writerow(["quantity", "gamma_star", "rate_per_kick"])
        w.writerow(["sigma2_delta", _fmt(g), _fmt(predictions.guarneri_rate(g))])
    elif name == "sigma2_subdiff":
        w.writerow(["quantity", "t", "value"])
        for t in args.t:
            w.writerow(["sigma2_subdiff", _fmt(t),
                        _fmt(float(predictions.subdiffusion_sigma2(t, g, args.f,
                                                                   args.coef)))])
    elif name == "gaussian":
        w.writerow(["quantity", "q", "sigma2", "value"])
        w.writerow(["gaussian", q, _fmt(args.sigma2),
                    _fmt(float(predictions.gaussian_profile(q, args.sigma2)))])
    else:
        raise ConfigError(f"unknown quantity {name!r}")
    return EXIT_OK


def read_timeseries(path: str) -> dict:
    cols: dict = {}
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        for row in reader:
            for k, v in row.items():
                cols.setdefault(k, []).append(float(v))
    return {k: np.asarray(v) for k, v in cols.items()}


def cmd_compare(args) -> int:
    with open(args.spec) as fh:
        spec = json.load(fh)
    for key in ("kind", "series", "window", "expected", "tol"):
        if key not in spec:
            raise ConfigError(f"comparison spec is missing {key!r}")
    series = read_timeseries(os.path.join(args.run, "timeseries.csv"))
    if spec["series"] not in series:
        raise ConfigError(f"series {spec['series']!r} not in artifacts")
    t = series["t"]
    y = series[spec["series"]]
    window = tuple(spec["window"])
    kind = spec["kind"]
    if kind == "power_law":
        fit = predictions.fit_power_law(t, y, window)
        measured = fit.value
        deviation = abs(measured - spec["expected"])
        ok = deviation <= spec["tol"]
    elif kind == "exponential":
        fit = predictions.fit_exponential(t, y, window)
        measured = fit.value
        deviation = abs(measured - spec["expected"]) / abs(spec["expected"])
        ok = deviation <= spec["tol"]
    else:
        raise ConfigError(f"unknown comparison kind {kind!r}")
    verdict = "PASS" if ok else "FAIL"
    print(f"kind={kind} series={spec['series']} window={window}")
    print(f"measured={_fmt(measured)} expected={_fmt(spec['expected'])} "
          f"deviation={_fmt(deviation)} tol={_fmt(spec['tol'])} -> {verdict}")
    return EXIT_OK if ok else EXIT_COMPARE_FAIL


def cmd_sweep(args) -> int:
    with open(args.config) as fh:
        spec = json.load(fh)
    sweep = spec.pop("sweep", None)
    fit_kind = spec.pop("fit", "tau")
    if not sweep or "key" not in sweep or "values" not in sweep:
        raise ConfigError("sweep config needs a 'sweep' object with key/values")
    base = {k: v for k, v in spec.items()}
    unknown = set(base) - set(CONFIG_KEYS)
    if unknown:
        raise ConfigError(f"unknown config keys: {sorted(unknown)}")
    values = sweep["values"]
    horizons = sweep.get("horizon", [base.get("horizon")] * len(values))
    nrs = sweep.get("nr", [base.get("nr")] * len(values))
    configs, labels = [], []
    for v, hz, nr in zip(values, horizons, nrs):
        point = dict(base)
        point[sweep["key"]] = v
        if hz is not None:
            point["horizon"] = hz
        if nr is not None:
            point["nr"] = nr
        configs.append(build_sim(point))
        labels.append(float(v))

    if fit_kind == "tau":
        def fitter(stats, config):
            fit = predictions.extract_tau(
                stats.times, stats.mean["condensate"],
                config.gamma_star, config.lam, digits=config.scalar.digits,
            )
            return -1.0 / fit.value
    elif fit_kind == "subdiffusion":
        def fitter(stats, config):
            window = (config.horizon / 6.0, config.horizon)
            return predictions.fit_power_law(
                stats.times, stats.mean["sigma2"], window
            ).value
    else:
        raise ConfigError(f"unknown sweep fit {fit_kind!r}")

    result = run_sweep(SweepPlan(configs, labels, axis=sweep["key"],
                                 fitter=fitter), progress=not args.quiet)
    os.makedirs(args.out, exist_ok=True)
    path = os.path.join(args.out, "sweep.csv")
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow([sweep["key"], fit_kind])
        for lab, val in result.summary_rows():
            w.writerow([_fmt(lab), _fmt(val)])
    for lab, msg in result.failures.items():
        print(f"point {lab}: FAILED ({msg})", file=sys.stderr)
    if len(result.labels) >= 2:
        exp_fit = predictions.fit_power_law(
            np.asarray(result.labels), np.asarray(result.values),
            (min(result.labels), max(result.labels)),
        ) if len(result.labels) >= 8 else None
        if exp_fit is None:
            x = np.log(np.asarray(result.labels, dtype=float))
            yv = np.log(np.asarray(result.values, dtype=float))
            slope = float(np.polyfit(x, yv, 1)[0])
        else:
            slope = exp_fit.value
        print(f"{fit_kind} ~ {sweep['key']}^{slope:.3f}")
        with open(path, "a", newline="") as fh:
            csv.writer(fh).writerow(["exponent", _fmt(slope)])
    print(f"wrote {path}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="kickedgas",
        description="Kicked-interaction Bose gas simulator and analytics",
    )
    sub = ap.add_subparsers(dest="command", required=True)

    def add_overrides(p):
        p.add_argument("--gamma-star", dest="gamma_star", type=float)
        p.add_argument("--f", type=float)
        p.add_argument("--lambda", dest="lambda_", type=float)
        p.add_argument("--ns", type=int)
        p.add_argument("--ds", type=float)
        p.add_argument("--horizon", type=int)
        p.add_argument("--nr", type=int)
        p.add_argument("--nd", type=int)
        p.add_argument("--seed", type=int)
        p.add_argument("--kick", choices=["delta", "finite"])

    run_p = sub.add_parser("run", help="run one ensemble and write artifacts")
    run_p.add_argument("--config", required=True)
    run_p.add_argument("--out", required=True)
    run_p.add_argument("--quiet", action="store_true")
    add_overrides(run_p)
    run_p.set_defaults(func=cmd_run)

    sweep_p = sub.add_parser("sweep", help="run a parameter sweep")
    sweep_p.add_argument("--config", required=True)
    sweep_p.add_argument("--out", required=True)
    sweep_p.add_argument("--quiet", action="store_true")
    sweep_p.set_defaults(func=cmd_sweep)

    pred_p = sub.add_parser("predict", help="print closed-form predictions")
    pred_p.add_argument(
        "quantity",
        choices=["t_E", "t_q", "tau", "t_f", "psi1",
                 "sigma2_delta", "sigma2_subdiff", "gaussian"],
    )
    pred_p.add_argument("--gamma-star", dest="gamma_star", type=float,
                        required=True)
    pred_p.add_argument("--lambda", dest="lambda_", type=float, default=3.03)
    pred_p.add_argument("--f", type=float, default=16.0)
    pred_p.add_argument("--q", type=int, default=1)
    pred_p.add_argument("--t", type=float, nargs="*", default=[100.0])
    pred_p.add_argument("--coef", type=float, default=1.0)
    pred_p.add_argument("--sigma2", type=float, default=1.0)
    pred_p.set_defaults(func=cmd_predict)

    cmp_p = sub.add_parser("compare", help="compare run artifacts to a prediction")
    cmp_p.add_argument("--run", required=True, help="artifact directory")
    cmp_p.add_argument("--spec", required=True, help="comparison spec JSON")
    cmp_p.set_defaults(func=cmd_compare)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ConfigError, FileNotFoundError, json.JSONDecodeError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except InvalidEnsembleError as exc:
        print(f"numeric abort: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except FitRefusedError as exc:
        print(f"fit refused: {exc}", file=sys.stderr)
        return EXIT_FIT


if __name__ == "__main__":
    sys.exit(main())
