"""Command-line front end: ``jsrec {bench,bounds,verify,demo}``.

Exit codes: 0 success, 1 runtime or I/O failure, 2 usage error.
Precedence of settings: explicit flag > ``--config`` file > preset > default.
"""

from __future__ import annotations

import argparse
import logging
import math
import sys
from pathlib import Path

import numpy as np

from . import asymptotics as asy
from .bench import DEFAULT_ALGORITHMS, PRESETS, ExperimentSpec, run_experiment
from .mmv import generate_instance, parse_metadata
from .recovery import PIPELINES, RecoveryError, recover
from .verify import SUITE_ALIASES, SUITES, run_suite

DEFAULTS = dict(m=40, n=100, r=9, snr_db=40.0, ensemble="zero_mean", trials=500, seed=0,
                k_min=1, k_max=20, k=14)


class UsageError(Exception):
    pass


def _add_problem_flags(p, with_k_range=True):
    p.add_argument("--m", type=int, help="measurements (default 40)")
    p.add_argument("--n", type=int, help="ambient dimension (default 100)")
    p.add_argument("--r", type=int, help="snapshots (default 9)")
    p.add_argument("--k", type=int, help="sparsity; in bench a single-k run")
    if with_k_range:
        p.add_argument("--k-min", dest="k_min", type=int, help="first sparsity (default 1)")
        p.add_argument("--k-max", dest="k_max", type=int, help="last sparsity (default 20)")
    p.add_argument("--snr-db", dest="snr_db", type=float, help="SNR in dB (default 40)")
    p.add_argument("--noiseless", action="store_true", default=None, help="no additive noise")
    p.add_argument("--ensemble", choices=["zeromean", "unitmean", "zero_mean", "unit_mean"],
                   help="sensing matrix ensemble (default zeromean)")
    p.add_argument("--seed", type=int, help="base seed (default 0)")
    p.add_argument("--config", type=Path, help="flat key=value file; flags override it")


def build_parser():
    parser = argparse.ArgumentParser(
        prog="jsrec", description="Joint sparse recovery with compressive MUSIC.")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    b = sub.add_parser("bench", help="Monte Carlo recovery-rate curves")
    _add_problem_flags(b)
    b.add_argument("--trials", type=int, help="trials per k (default 500)")
    b.add_argument("--preset", choices=sorted(PRESETS), help="reference simulation setting (fig1a Gaussian, fig1b unit-mean)")
    b.add_argument("--algorithms", help=f"comma list from {','.join(sorted(PIPELINES))}")
    b.add_argument("-o", "--output", type=Path, help="CSV path (default: stdout)")
    b.add_argument("--plot-dir", type=Path, help="also write k/rate .dat files per algorithm")

    bd = sub.add_parser("bounds", help="evaluate asymptotic thresholds")
    bd.add_argument("quantity", choices=["F", "t1", "somp", "ml-sufficient", "ml-necessary",
                                         "chi-tail", "mp-cdf"])
    bd.add_argument("--alpha", type=float)
    bd.add_argument("--epsilon", type=float)
    bd.add_argument("--rho", type=float)
    bd.add_argument("--k", type=int)
    bd.add_argument("--n", type=int)
    bd.add_argument("--r", type=int)
    bd.add_argument("--delta", type=float, default=0.0)
    bd.add_argument("--regime", choices=["fixed_r", "proportional_r"])
    bd.add_argument("--snr", type=float, help="linear SNR")
    bd.add_argument("--kappa", help="comma list of eigenvalue bounds, nonincreasing")
    bd.add_argument("--sigma-w", dest="sigma_w", type=float, default=1.0)
    bd.add_argument("--mutual-info", dest="mutual_info", type=float, default=0.0)
    bd.add_argument("--eps", type=float, help="relative deviation for chi-tail")
    bd.add_argument("--gamma", type=float)
    bd.add_argument("--x", type=float)
    bd.add_argument("--sweep", help="NAME=START:STOP:NUM, prints a CSV table")
    bd.add_argument("-o", "--output", type=Path)

    v = sub.add_parser("verify", help="run numerical property suites")
    v.add_argument("suite", choices=sorted(SUITES) + sorted(SUITE_ALIASES) + ["all"])
    v.add_argument("--quick", action="store_true", help="reduced scale")
    v.add_argument("--seeds", type=int)
    v.add_argument("--trials", type=int)
    v.add_argument("--m", type=int)
    v.add_argument("--k", type=int)

    d = sub.add_parser("demo", help="one instance through every pipeline")
    _add_problem_flags(d, with_k_range=False)
    return parser


# --- settings resolution -------------------------------------------------------

_INT_KEYS = {"m", "n", "r", "k", "k_min", "k_max", "trials", "seed"}


def _load_config(path):
    try:
        raw = parse_metadata(Path(path).read_text())
    except OSError as exc:
        raise UsageError(f"cannot read config {path}: {exc}")
    except ValueError as exc:
        raise UsageError(str(exc))
    cfg = {}
    for key, value in raw.items():
        key = key.replace("-", "_")
        if key in _INT_KEYS:
            cfg[key] = int(value)
        elif key == "snr_db":
            cfg[key] = None if value.lower() == "none" else float(value)
        elif key == "noiseless":
            cfg[key] = value.lower() in ("1", "true", "yes")
        else:
            cfg[key] = value
    return cfg


def _resolve(args, preset=None):
    settings = dict(DEFAULTS)
    if preset is not None:
        spec = PRESETS[preset]
        settings.update(m=spec.m, n=spec.n, r=spec.r, snr_db=spec.snr_db,
                        ensemble=spec.ensemble, k_min=spec.k_min, k_max=spec.k_max)
    if getattr(args, "config", None):
        settings.update(_load_config(args.config))
    for key in list(DEFAULTS) + ["noiseless", "algorithms"]:
        val = getattr(args, key, None)
        if val is not None:
            settings[key] = val
    if settings.get("noiseless"):
        settings["snr_db"] = None
    return settings


# --- subcommands ----------------------------------------------------------------

def cmd_bench(args, out):
    s = _resolve(args, args.preset)
    if s["trials"] < 1:
        raise UsageError("--trials must be >= 1")
    if args.k is not None:
        s["k_min"] = s["k_max"] = args.k
    algorithms = s.get("algorithms") or DEFAULT_ALGORITHMS
    if isinstance(algorithms, str):
        algorithms = tuple(a.strip() for a in algorithms.split(",") if a.strip())
    try:
        spec = ExperimentSpec(m=s["m"], n=s["n"], r=s["r"], k_min=s["k_min"], k_max=s["k_max"],
                              snr_db=s["snr_db"], ensemble=s["ensemble"], trials=s["trials"],
                              algorithms=algorithms, base_seed=s["seed"])
    except ValueError as exc:
        raise UsageError(str(exc))
    curve = run_experiment(spec)
    if args.output is None:
        out.write(curve.to_csv())
    else:
        curve.write(args.output, args.plot_dir)
    return 0


def _parse_sweep(text):
    try:
        name, rng = text.split("=", 1)
        start, stop, num = rng.split(":")
        return name.strip(), np.linspace(float(start), float(stop), int(num))
    except ValueError:
        raise UsageError(f"--sweep expects NAME=START:STOP:NUM, got {text!r}")


def _require(args, *names):
    missing = [n for n in names if getattr(args, n) is None]
    if missing:
        raise UsageError("missing required flag(s): " + ", ".join("--" + m.replace("_", "-")
                                                                 for m in missing))


def _bound_values(q, args):
    """Evaluate one bound; returns ordered (key, formatted value) pairs."""
    if q == "F":
        _require(args, "alpha")
        if not 0.0 < args.alpha <= 1.0:
            raise UsageError("alpha must lie in (0, 1]")
        return [("F", f"{asy.big_F(args.alpha):.6f}")]
    if q == "t1":
        _require(args, "alpha")
        if not 0.0 <= args.alpha <= 1.0:
            raise UsageError("alpha must lie in [0, 1]")
        return [("t1", f"{asy.t1_of_alpha(args.alpha):.6f}")]
    if q == "somp":
        _require(args, "k", "n")
        if args.k >= args.n or args.k < 1:
            raise UsageError("require 1 <= k < n")
        if args.delta < 0:
            raise UsageError("delta must be >= 0")
        regime = args.regime or ("proportional_r" if args.alpha is not None else "fixed_r")
        if regime == "fixed_r":
            _require(args, "r")
            if args.r < 1:
                raise UsageError("r must be >= 1")
        elif args.alpha is None and args.r is None:
            raise UsageError("proportional_r regime needs --alpha or --r")
        elif args.alpha is not None and not 0.0 < args.alpha <= 1.0:
            raise UsageError("alpha must lie in (0, 1]")
        m_min = asy.somp_sample_bound(args.k, args.n, args.r, args.delta, regime, args.alpha)
        return [("regime", regime), ("m_min", f"{m_min:.3f}")]
    if q in ("ml-sufficient", "ml-necessary"):
        _require(args, "epsilon", "alpha")
        if not 0.0 < args.epsilon < 1.0:
            raise UsageError("epsilon must lie in (0, 1)")
        if not 0.0 < args.alpha <= 1.0 - args.epsilon:
            raise UsageError(f"alpha must lie in (0, 1 - epsilon] = (0, {1 - args.epsilon:g}]")
        if q == "ml-sufficient":
            _require(args, "snr")
            try:
                inputs = asy.BoundInputs(args.epsilon, args.rho, args.alpha, args.r or 1, args.snr)
                res = asy.ml_sufficient(inputs)
            except ValueError as exc:
                raise UsageError(str(exc))
            return [("snr_threshold", f"{res.snr_threshold:.6f}"), ("snr_ok", str(res.snr_ok).lower()),
                    ("rho_threshold", f"{res.rho_threshold:.6f}"),
                    ("satisfied", str(res.satisfied).lower())]
        _require(args, "kappa")
        try:
            kappa = [float(x) for x in args.kappa.split(",")]
            inputs = asy.BoundInputs(args.epsilon, args.rho, args.alpha, len(kappa),
                                     kappa=kappa, sigma_w=args.sigma_w)
            rho_min = asy.ml_necessary_rho(inputs, args.mutual_info)
        except ValueError as exc:
            raise UsageError(str(exc))
        return [("rho_min", f"{rho_min:.6f}")]
    if q == "chi-tail":
        _require(args, "r", "eps")
        if args.r < 1 or not 0.0 < args.eps < 1.0:
            raise UsageError("require r >= 1 and 0 < eps < 1")
        b = asy.chi_tail_bounds(args.r, args.eps)
        return [("upper", f"{b['upper']:.6e}"), ("lower", f"{b['lower']:.6e}")]
    if q == "mp-cdf":
        _require(args, "gamma", "x")
        if not 0.0 < args.gamma <= 1.0:
            raise UsageError("gamma must lie in (0, 1]")
        return [("cdf", f"{asy.MpMeasure(args.gamma).cdf(args.x):.6f}")]
    raise UsageError(f"unknown quantity {q}")


def cmd_bounds(args, out):
    if args.sweep is None:
        text = "".join(f"{k}={v}\n" for k, v in _bound_values(args.quantity, args))
    else:
        name, grid = _parse_sweep(args.sweep)
        if not hasattr(args, name):
            raise UsageError(f"cannot sweep unknown parameter {name!r}")
        rows, header = [], None
        for value in grid:
            setattr(args, name, int(round(value)) if name in ("k", "n", "r") else float(value))
            pairs = _bound_values(args.quantity, args)
            header = header or ",".join([name] + [k for k, _ in pairs])
            rows.append(",".join([f"{value:.6g}"] + [v for _, v in pairs]))
        text = "\n".join([header] + rows) + "\n"
    if args.output is None:
        out.write(text)
    else:
        args.output.write_text(text)
    return 0


_VERIFY_FLAGS = {
    "gmusic-iff": {"seeds": "seeds"}, "fit-iff": {"seeds": "seeds"},
    "music": {"trials": "trials"}, "mp": {"trials": "trials", "m": "m", "k": "k"},
    "chimax": {"trials": "trials"}, "singular-sum": {"trials": "trials", "m": "m", "k": "k"},
}


def cmd_verify(args, out):
    names = sorted(SUITES) if args.suite == "all" else [SUITE_ALIASES.get(args.suite, args.suite)]
    all_ok = True
    for name in names:
        params = {dest: getattr(args, flag) for flag, dest in _VERIFY_FLAGS.get(name, {}).items()}
        res = run_suite(name, quick=args.quick, **params)
        out.write(res.report(timing=args.verbose) + "\n")
        all_ok &= res.passed
    out.write(f"{'ALL PASS' if all_ok else 'SOME FAILED'}\n")
    return 0 if all_ok else 1


def _fmt_support(indices):
    return "{" + ",".join(str(int(i) + 1) for i in sorted(indices)) + "}"


def cmd_demo(args, out):
    s = _resolve(args)
    try:
        inst = generate_instance(s["m"], s["n"], s["k"], s["r"], s["snr_db"], s["ensemble"],
                                 s["seed"])
    except ValueError as exc:
        raise UsageError(str(exc))
    k = s["k"]
    truth = inst.S.as_set()
    snr = "none (noiseless)" if s["snr_db"] is None else f"{s['snr_db']:g} dB"
    out.write(f"instance: m={inst.m} n={inst.n} k={k} r={inst.r} ensemble={inst.A.ensemble_tag} "
              f"snr={snr} seed={s['seed']}\n")
    out.write(f"true support (1-based): {_fmt_support(truth)}\n\n")
    out.write(f"{'algorithm':<20} {'exact':<6} {'missed':<7} estimate\n")
    estimates = {}
    for alg in ("somp", "cs_music", "sa_music", "cs_music_optimized"):
        try:
            est = recover(alg, inst.A.entries, inst.Y, k)
        except RecoveryError as exc:
            out.write(f"{alg:<20} error: {exc}\n")
            continue
        estimates[alg] = est
        got = est.as_set()
        out.write(f"{alg:<20} {'yes' if got == truth else 'no':<6} {len(truth - got):<7} "
                  f"{_fmt_support(got)}\n")
    opt = estimates.get("cs_music_optimized")
    if opt is not None and opt.fit_values:
        out.write("\nsubspace fitting zeta over the step-1 candidates (ascending):\n")
        out.write(f"{'index':>6} {'zeta':>12} {'in S':>5} {'kept':>5}\n")
        kept = set(opt.partial.indices)
        for j, z in sorted(opt.fit_values.items(), key=lambda kv: (kv[1], kv[0])):
            out.write(f"{j + 1:>6} {z:>12.4e} {'*' if j in truth else '':>5} "
                      f"{'*' if j in kept else '':>5}\n")
    if opt is not None:
        rows = sorted(opt.criterion_values.items(), key=lambda kv: (kv[1], kv[0]))
        shown = rows[:opt.r_eff + 5]
        label = "eta (generalized MUSIC)" if opt.partial.indices else "MUSIC criterion"
        out.write(f"\n{label}, smallest {len(shown)} of {len(rows)}:\n")
        out.write(f"{'index':>6} {'value':>12} {'in S':>5}\n")
        for j, e in shown:
            out.write(f"{j + 1:>6} {e:>12.4e} {'*' if j in truth else '':>5}\n")
    return 0


COMMANDS = {"bench": cmd_bench, "bounds": cmd_bounds, "verify": cmd_verify, "demo": cmd_demo}


def main(argv=None, out=None):
    out = sys.stdout if out is None else out
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return COMMANDS[args.command](args, out)
    except UsageError as exc:
        parser.print_usage(sys.stderr)
        print(f"jsrec {args.command}: error: {exc}", file=sys.stderr)
        return 2
    except (OSError, RecoveryError, ValueError, ArithmeticError) as exc:
        print(f"jsrec {args.command}: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
