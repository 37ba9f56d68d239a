"""Command-line front end emitting CSV/JSON data plus a run manifest."""

from __future__ import annotations

import argparse
import csv
import hashlib
import json
import math
import os
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from datetime import datetime
from pathlib import Path

import numpy as np

from . import __version__
from .analysis import (ScalingSample, ep_envelope_bounds, fit_exponent, phase_diagram,
                       predicted_alpha, query_complexity, validity_bound_nstar)
from .dynamics import (DEFAULT_EPSILON, ResetSchedule, fidelity_arrays, reset_search_time,
                       search_time)
from .model import (ModelParams, NumericalError, ParameterError, build_params,
                    exceptional_point, matrix_elements)
from .oracle import DENSE_CAP, reduction_report, trajectory_monte_carlo
from .spectral import (decay_rates, eigenvalues, eigenvector_components, overlaps,
                       slow_fast)

SCHEMA_VERSION = 1
JOBS_ENV = "MONITORED_SEARCH_JOBS"

EXIT_OK = 0
EXIT_INVALID = 2
EXIT_NUMERICAL = 3


# -- output helpers ----------------------------------------------------------

def _fmt(x):
    if isinstance(x, (bool, np.bool_)):
        return "true" if x else "false"
    if isinstance(x, (float, np.floating)):
        return repr(float(x))
    return str(x)


def write_csv(path: Path, header, rows):
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow([_fmt(x) for x in row])


def _jsonable(x):
    if isinstance(x, dict):
        return {str(k): _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_jsonable(v) for v in x]
    if isinstance(x, np.ndarray):
        return _jsonable(x.tolist())
    if isinstance(x, (np.bool_, bool)):
        return bool(x)
    if isinstance(x, (np.integer,)):
        return int(x)
    if isinstance(x, (float, np.floating)):
        x = float(x)
        return x if math.isfinite(x) else str(x)
    if isinstance(x, complex):
        return [x.real, x.imag]
    return x


def write_json(path: Path, payload):
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        json.dump(_jsonable(payload), fh, indent=2, sort_keys=True)
        fh.write("\n")


def _sha256(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


def write_manifest(out: Path, args, outputs, started: float, seeds=()):
    params = {k: v for k, v in vars(args).items() if k not in ("func",)}
    manifest = {
        "schema_version": SCHEMA_VERSION,
        "command": args.command,
        "parameters": params,
        "seeds": list(seeds),
        "version": __version__,
        "outputs": {p.name: _sha256(p) for p in outputs},
        "wall_clock_seconds": time.time() - started,
        "created": datetime.now().isoformat(timespec="seconds"),
    }
    write_json(out / "manifest.json", manifest)


def parallel_map(fn, items, jobs: int):
    """Ordered map, optionally over worker processes."""
    items = list(items)
    if jobs <= 1 or len(items) <= 1:
        return [fn(x) for x in items]
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(fn, items))


# -- parameter entry ---------------------------------------------------------

def _model_args(parser, multi_n=True):
    g = parser.add_argument_group("model parameters")
    g.add_argument("--N", type=int, nargs="+" if multi_n else None, required=True,
                   help="database size(s)")
    g.add_argument("--r-bar", type=float, help="hopping exponent: gamma = gamma_bar N^(-r_bar-1)")
    g.add_argument("--s", type=float, help="monitoring exponent: kappa = kappa_bar N^(-s)")
    g.add_argument("--gamma-bar", type=float, default=1.0)
    g.add_argument("--kappa-bar", type=float, default=1.0)
    g.add_argument("--gamma", type=float, help="fixed hopping rate (overrides r_bar)")
    g.add_argument("--kappa", type=float, help="fixed monitoring rate (overrides s)")
    g.add_argument("--gamma-ep", action="store_true", help="use the exceptional-point hopping rate")
    g.add_argument("--kappa-ep", action="store_true", help="use the exceptional-point monitoring rate")
    g.add_argument("--epsilon-w", type=float, default=1.0)


def params_for(args, N: int, gamma=None, kappa=None) -> ModelParams:
    gamma = args.gamma if gamma is None else gamma
    kappa = args.kappa if kappa is None else kappa
    g_ep, k_ep = exceptional_point(N)
    if args.gamma_ep:
        gamma = g_ep
    if args.kappa_ep:
        kappa = k_ep
    if gamma is None or kappa is None:
        if args.r_bar is None or args.s is None:
            raise ParameterError("give --gamma/--kappa or --r-bar/--s (or the EP flags)")
        scaled = build_params(N, args.gamma_bar, args.kappa_bar, args.r_bar, args.s, args.epsilon_w)
        if gamma is None and kappa is None:
            return scaled
        gamma = scaled.gamma if gamma is None else gamma
        kappa = scaled.kappa if kappa is None else kappa
    return ModelParams(N=N, gamma=gamma, kappa=kappa, epsilon_w=args.epsilon_w)


def _n_list(args):
    return args.N if isinstance(args.N, list) else [args.N]


def _float_list(text_values):
    return [float(x) for x in text_values]


# -- commands ------------------------------------------------------------------

SPECTRUM_HEADER = ["N", "gamma", "kappa",
                   "re_lambda_plus", "im_lambda_plus", "re_lambda_minus", "im_lambda_minus",
                   "re_lambda_s", "im_lambda_s", "re_lambda_f", "im_lambda_f",
                   "re_v_plus", "im_v_plus", "re_v_minus", "im_v_minus",
                   "O_plus", "O_minus", "re_O_cross", "im_O_cross", "near_ep"]


def spectrum_row(p: ModelParams):
    m = matrix_elements(p)
    sd = eigenvalues(m)
    lam_s, lam_f = slow_fast(sd)
    row = [p.N, p.gamma, p.kappa, sd.lambda_plus.real, sd.lambda_plus.imag,
           sd.lambda_minus.real, sd.lambda_minus.imag, lam_s.real, lam_s.imag,
           lam_f.real, lam_f.imag]
    if sd.near_ep:
        row += [math.nan] * 8
    else:
        vp, vm = eigenvector_components(m, sd)
        ov = overlaps(m, p.N, sd)
        row += [vp.real, vp.imag, vm.real, vm.imag, ov.O_plus, ov.O_minus,
                ov.O_cross.real, ov.O_cross.imag]
    return row + [sd.near_ep]


def cmd_spectrum(args, out: Path):
    gammas = args.gamma_values or [None]
    kappas = args.kappa_values or [None]
    plist = [params_for(args, N, g, k) for N in _n_list(args) for g in gammas for k in kappas]
    rows = parallel_map(spectrum_row, plist, args.jobs)
    path = out / "spectrum.csv"
    write_csv(path, SPECTRUM_HEADER, rows)
    return [path]


def _time_grid(args, p: ModelParams):
    if args.t_max is not None:
        t_max = args.t_max
    elif args.adaptive:
        horizon = (search_time(p, args.epsilon) if args.reset_T is None
                   else reset_search_time(p, args.reset_T, args.epsilon))
        t_max = 2.0 * horizon
    else:
        raise ParameterError("give --t-max or --adaptive")
    if args.t_step is not None:
        if args.t_step <= 0:
            raise ParameterError("--t-step must be positive")
        return np.arange(0.0, t_max + 0.5 * args.t_step, args.t_step)
    return np.linspace(0.0, t_max, args.t_points)


def cmd_pt(args, out: Path):
    schedule = ResetSchedule(args.reset_T, epsilon=args.epsilon) if args.reset_T else None
    header = ["N", "t", "P", "F0", "F1"] + (["lower", "upper"] if args.bounds else [])
    rows = []
    for N in _n_list(args):
        p = params_for(args, N)
        t = _time_grid(args, p)
        f0, f1, surv = fidelity_arrays(p, t, schedule)
        cols = [t, surv, f0, f1]
        if args.bounds:
            kappa_bar = p.kappa * math.sqrt(N)
            cols += list(ep_envelope_bounds(N, kappa_bar, t))
        rows += [[N, *vals] for vals in zip(*cols)]
    path = out / "pt.csv"
    write_csv(path, header, rows)
    return [path]


def _tau_task(task):
    args_dict, N = task
    ns = argparse.Namespace(**args_dict)
    p = params_for(ns, N)
    mode = ns.mode
    if mode == "no_reset":
        return search_time(p, ns.epsilon)
    rate_s, rate_f = decay_rates(eigenvalues(matrix_elements(p)))
    if mode == "reset_fast":
        T = 1.0 / rate_f
    elif mode == "reset_slow":
        T = 1.0 / rate_s
    elif mode == "reset_beta":
        T = float(N) ** ns.beta
    else:
        T = ns.T
    return reset_search_time(p, T, ns.epsilon)


def _args_dict(args):
    return {k: v for k, v in vars(args).items() if k != "func"}


def cmd_tau(args, out: Path):
    if args.mode == "reset_fixed" and args.T is None:
        raise ParameterError("--mode reset_fixed needs --T")
    if args.mode == "reset_beta" and args.beta is None:
        raise ParameterError("--mode reset_beta needs --beta")
    ns = _n_list(args)
    taus = parallel_map(_tau_task, [(_args_dict(args), N) for N in ns], args.jobs)
    csv_path = out / "tau.csv"
    write_csv(csv_path, ["N", "tau"], zip(ns, taus))
    report = {"mode": args.mode, "epsilon": args.epsilon, "fit": None, "predicted_alpha": None}
    if len(set(ns)) >= 3:
        fit = fit_exponent([ScalingSample(N, t) for N, t in zip(ns, taus)])
        report["fit"] = {"alpha_hat": fit.alpha_hat, "intercept": fit.intercept,
                         "r_squared": fit.r_squared}
    if args.r_bar is not None and args.s is not None and args.gamma is None and args.kappa is None \
            and args.mode in ("no_reset", "reset_fast"):
        report["predicted_alpha"] = predicted_alpha(args.r_bar, args.s, args.gamma_bar, args.mode)
    json_path = out / "fit.json"
    write_json(json_path, report)
    return [csv_path, json_path]


def _grid(values, lo, hi, num, name):
    if values:
        return _float_list(values)
    if lo is None or hi is None:
        raise ParameterError(f"give --{name}-grid or --{name}-min/--{name}-max")
    return np.linspace(lo, hi, num).tolist()


def cmd_phase_diagram(args, out: Path):
    r_grid = _grid(args.r_grid, args.r_min, args.r_max, args.r_num, "r")
    s_grid = _grid(args.s_grid, args.s_min, args.s_max, args.s_num, "s")
    pd = phase_diagram(r_grid, s_grid, args.mode, args.gamma_bar, args.tol)
    csv_path = out / "alpha.csv"
    write_csv(csv_path, ["s\\r_bar", *pd.r_grid],
              ([s, *row] for s, row in zip(pd.s_grid, pd.alpha.tolist())))
    meta = {
        "mode": pd.mode, "gamma_bar": args.gamma_bar, "r_grid": pd.r_grid, "s_grid": pd.s_grid,
        "tags": pd.tags,
        "worse_than_classical": pd.worse_than_classical,
        "grover_or_better_cells": [[i, j] for i, j in zip(*np.nonzero(pd.grover_or_better))],
    }
    json_path = out / "phase_diagram.json"
    write_json(json_path, meta)
    return [csv_path, json_path]


def cmd_reset_scan(args, out: Path):
    path = out / "reset_scan.csv"
    if args.beta_grid:
        rows = []
        for N in _n_list(args):
            p = params_for(args, N)
            tau = search_time(p, args.epsilon)
            for beta in _float_list(args.beta_grid):
                T = float(N) ** beta
                tau_r = reset_search_time(p, T, args.epsilon)
                rows.append([N, beta, T, tau_r, tau_r / tau, math.log(tau_r / tau) / math.log(N)])
        write_csv(path, ["N", "beta", "T", "tau_R", "ratio", "exponent_change"], rows)
        return [path]
    if args.T_grid:
        T_grid = _float_list(args.T_grid)
    elif args.T_min is not None and args.T_max is not None:
        T_grid = np.geomspace(args.T_min, args.T_max, args.T_num).tolist()
    else:
        raise ParameterError("give --T-grid, --T-min/--T-max, or --beta-grid")
    if not T_grid:
        raise ParameterError("empty reset-period grid")
    rows = []
    for N in _n_list(args):
        p = params_for(args, N)
        tau = search_time(p, args.epsilon)
        for T in T_grid:
            try:
                tau_r = reset_search_time(p, T, args.epsilon)
            except ParameterError:
                continue
            rows.append([N, T, tau_r, tau_r / tau, math.log(tau_r / tau) / math.log(N)])
    if not rows:
        raise ParameterError("resetting cannot converge at any grid point")
    write_csv(path, ["N", "T", "tau_R", "ratio", "exponent_change"], rows)
    return [path]


def cmd_oracle_check(args, out: Path):
    reports = []
    for N in _n_list(args):
        if N > args.cap:
            raise ParameterError(f"N={N} exceeds the dense cap {args.cap}")
        p = params_for(args, N)
        t = np.linspace(0.0, args.t_max, args.t_points)
        rep = reduction_report(p, t, method=args.method, cap=args.cap)
        reports.append({"N": N, "gamma": p.gamma, "kappa": p.kappa,
                        "max_P_deviation": rep.max_P_deviation,
                        "max_F0_deviation": rep.max_F0_deviation,
                        "max_conservation_residual": rep.max_conservation_residual})
    path = out / "oracle_report.json"
    write_json(path, {"method": args.method, "t_max": args.t_max, "reports": reports})
    return [path]


def cmd_mc(args, out: Path):
    N = _n_list(args)[0]
    p = params_for(args, N)
    schedule = ResetSchedule(args.reset_T, epsilon=args.epsilon) if args.reset_T else None
    res = trajectory_monte_carlo(p, schedule, args.n_traj, args.seed, bins=args.bins)
    expected = np.diff(fidelity_arrays(p, res.bin_edges, schedule)[1]) * args.n_traj
    hist_path = out / "histogram.csv"
    write_csv(hist_path, ["bin_left", "bin_right", "count", "analytic_count"],
              zip(res.bin_edges[:-1], res.bin_edges[1:], res.counts, expected))
    f1_path = out / "f1.csv"
    write_csv(f1_path, ["t", "F1_empirical", "F1_analytic", "standard_error"],
              zip(res.probe_times, res.empirical_F1, res.analytic_F1, res.standard_error))
    times = np.sort(res.click_times[np.isfinite(res.click_times)])
    cdf = fidelity_arrays(p, times, schedule)[1]
    n = args.n_traj
    ks = float(max(np.max(np.arange(1, times.size + 1) / n - cdf, initial=0.0),
                   np.max(cdf - np.arange(times.size) / n, initial=0.0)))
    summary_path = out / "mc_summary.json"
    write_json(summary_path, {"n_traj": n, "seed": args.seed, "ks_statistic": ks,
                              "ks_threshold_1pct": 1.63 / math.sqrt(n),
                              "never_clicked": int(np.sum(~np.isfinite(res.click_times)))})
    return [hist_path, f1_path, summary_path]


def cmd_query(args, out: Path):
    row = query_complexity(args.r_bar, args.s, args.reset)
    nstar = validity_bound_nstar(args.r_bar, args.s, args.gamma_bar, args.kappa_bar, args.dt0)
    path = out / "query.json"
    write_json(path, {"r_bar": args.r_bar, "s": args.s, "with_reset": args.reset,
                      "dt_exponent": row.dt_exponent, "tau_exponent": row.tau_exponent,
                      "nsteps_exponent": row.nsteps_exponent,
                      "tau_physical_exponent": row.tau_physical_exponent,
                      "dt0": args.dt0, "N_star": nstar})
    return [path]


# -- parser --------------------------------------------------------------------

def _default_jobs():
    try:
        return max(1, int(os.environ.get(JOBS_ENV, "1")))
    except ValueError:
        return 1


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--out", type=Path, help="output directory (default ./out/<timestamp>)")
    common.add_argument("--config", type=Path, help="JSON or key=value file mirroring the flags")
    common.add_argument("--jobs", type=int, default=_default_jobs(),
                        help=f"worker processes for sweeps (default from ${JOBS_ENV}, else 1)")

    parser = argparse.ArgumentParser(prog="monitored-search", description=__doc__)
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    sp = sub.add_parser("spectrum", parents=[common], help="eigenvalues, eigenvectors, overlaps")
    _model_args(sp)
    sp.add_argument("--gamma-values", type=float, nargs="+", help="sweep of hopping rates")
    sp.add_argument("--kappa-values", type=float, nargs="+", help="sweep of monitoring rates")
    sp.set_defaults(func=cmd_spectrum)

    sp = sub.add_parser("pt", parents=[common], help="no-click probability and fidelities in time")
    _model_args(sp)
    sp.add_argument("--t-max", type=float)
    sp.add_argument("--t-points", type=int, default=201)
    sp.add_argument("--t-step", type=float)
    sp.add_argument("--adaptive", action="store_true", help="t-range of twice the search time")
    sp.add_argument("--reset-T", type=float, help="reset period")
    sp.add_argument("--epsilon", type=float, default=DEFAULT_EPSILON)
    sp.add_argument("--bounds", action="store_true", help="add critical-line envelope columns")
    sp.set_defaults(func=cmd_pt)

    sp = sub.add_parser("tau", parents=[common], help="search time versus N with exponent fit")
    _model_args(sp)
    sp.add_argument("--epsilon", type=float, default=DEFAULT_EPSILON)
    sp.add_argument("--mode", default="no_reset",
                    choices=["no_reset", "reset_fast", "reset_slow", "reset_fixed", "reset_beta"])
    sp.add_argument("--T", type=float, help="reset period for reset_fixed")
    sp.add_argument("--beta", type=float, help="T = N**beta for reset_beta")
    sp.set_defaults(func=cmd_tau)

    sp = sub.add_parser("phase-diagram", parents=[common], help="predicted exponent on an (r_bar, s) grid")
    for name in ("r", "s"):
        sp.add_argument(f"--{name}-grid", nargs="+")
        sp.add_argument(f"--{name}-min", type=float)
        sp.add_argument(f"--{name}-max", type=float)
        sp.add_argument(f"--{name}-num", type=int, default=41)
    sp.add_argument("--mode", default="no_reset", choices=["no_reset", "reset_fast"])
    sp.add_argument("--gamma-bar", type=float, default=1.0)
    sp.add_argument("--tol", type=float, default=1e-12, help="boundary tolerance for grid cells")
    sp.set_defaults(func=cmd_phase_diagram)

    sp = sub.add_parser("reset-scan", parents=[common], help="reset search time over T or beta")
    _model_args(sp)
    sp.add_argument("--epsilon", type=float, default=DEFAULT_EPSILON)
    sp.add_argument("--T-grid", nargs="+")
    sp.add_argument("--T-min", type=float)
    sp.add_argument("--T-max", type=float)
    sp.add_argument("--T-num", type=int, default=41)
    sp.add_argument("--beta-grid", nargs="+")
    sp.set_defaults(func=cmd_reset_scan)

    sp = sub.add_parser("oracle-check", parents=[common], help="full-dimension cross-check")
    _model_args(sp)
    sp.add_argument("--t-max", type=float, default=50.0)
    sp.add_argument("--t-points", type=int, default=51)
    sp.add_argument("--method", default="adaptive", choices=["adaptive", "rk4"])
    sp.add_argument("--cap", type=int, default=DENSE_CAP)
    sp.set_defaults(func=cmd_oracle_check)

    sp = sub.add_parser("mc", parents=[common], help="trajectory Monte Carlo of click times")
    _model_args(sp)
    sp.add_argument("--reset-T", type=float)
    sp.add_argument("--epsilon", type=float, default=DEFAULT_EPSILON)
    sp.add_argument("--n-traj", type=int, default=10000)
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--bins", type=int, default=50)
    sp.set_defaults(func=cmd_mc)

    sp = sub.add_parser("query", parents=[common], help="query-complexity exponents and N*")
    sp.add_argument("--r-bar", type=float, required=True)
    sp.add_argument("--s", type=float, required=True)
    sp.add_argument("--reset", action="store_true")
    sp.add_argument("--dt0", type=float, default=0.01)
    sp.add_argument("--gamma-bar", type=float, default=1.0)
    sp.add_argument("--kappa-bar", type=float, default=1.0)
    sp.set_defaults(func=cmd_query)
    return parser


def load_config(path: Path) -> list[str]:
    """Translate a JSON or key=value file into command-line tokens."""
    text = path.read_text(encoding="utf-8")
    try:
        data = json.loads(text)
    except json.JSONDecodeError:
        data = {}
        for line in text.splitlines():
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            key, sep, value = line.partition("=")
            if not sep:
                raise ParameterError(f"config line is not key=value: {line!r}")
            data[key.strip()] = value.strip()
    if not isinstance(data, dict):
        raise ParameterError("config must be a mapping")
    if "schema_version" in data and isinstance(data.get("parameters"), dict):
        # A run manifest: replay its parameters, minus the per-run settings.
        data = {k: v for k, v in data["parameters"].items()
                if k not in ("command", "out", "config", "jobs")}
    tokens = []
    for key, value in data.items():
        flag = "--" + key.replace("_", "-")
        if value is None:
            continue
        if isinstance(value, bool) or (isinstance(value, str) and value.lower() in ("true", "false")):
            if value is True or str(value).lower() == "true":
                tokens.append(flag)
        elif isinstance(value, list):
            tokens += [flag, *map(str, value)]
        elif isinstance(value, str) and (" " in value or "," in value):
            tokens += [flag, *value.replace(",", " ").split()]
        else:
            tokens += [flag, str(value)]
    return tokens


def _expand_config(argv: list[str]) -> list[str]:
    """Insert config tokens right after the subcommand so explicit flags win."""
    if "--config" not in argv:
        return argv
    i = argv.index("--config")
    if i + 1 >= len(argv):
        return argv
    tokens = load_config(Path(argv[i + 1]))
    rest = argv[:i] + argv[i + 2:]
    return rest[:1] + tokens + rest[1:]


def main(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    try:
        argv = _expand_config(argv)
    except (OSError, ParameterError) as exc:
        print(json.dumps({"error": "invalid_config", "message": str(exc)}), file=sys.stderr)
        return EXIT_INVALID
    parser = build_parser()
    args = parser.parse_args(argv)
    started = time.time()
    out = args.out or Path("out") / datetime.now().strftime("%Y%m%d-%H%M%S")
    args.out = str(out)
    try:
        out.mkdir(parents=True, exist_ok=True)
        outputs = args.func(args, out)
        seeds = [args.seed] if hasattr(args, "seed") else []
        write_manifest(out, args, outputs, started, seeds)
    except (ParameterError, ValueError) as exc:
        print(json.dumps({"error": "invalid_parameters", "message": str(exc)}), file=sys.stderr)
        return EXIT_INVALID
    except (NumericalError, FloatingPointError, ArithmeticError) as exc:
        print(json.dumps({"error": "numerical_failure", "message": str(exc)}), file=sys.stderr)
        return EXIT_NUMERICAL
    print(str(out))
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
