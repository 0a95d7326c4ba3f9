"""Command-line entry point: ``ybl SUBCOMMAND [options]``.

Exit status: 0 on success, 2 for invalid input, 3 when a numerical routine
fails, 64 for an unknown subcommand.
"""

import argparse
from concurrent.futures import ThreadPoolExecutor
import json
import math
import os
import sys
import tempfile

import numpy as np

from . import acceptance
from .acceptance import Check, at_least, below, near
from .config import ExperimentConfig, apply_pairs, dump_pairs, read_pairs, thread_cap
from .errors import DomainError, NumericError

SUBCOMMANDS = ("constants", "correction", "odes", "greens", "approx-error", "lift-check", "simulate", "all")

USAGE = """usage: ybl {constants,correction,odes,greens,approx-error,lift-check,simulate,all} [options]

  constants     radial constants c1..c5, exact rationals and cancellation residuals
  correction    correction profile q0, q2 and its decay report
  odes          dilation and translation parameter paths with rate fits
  greens        torus Green's function shells and fitted quadratic coefficients
  approx-error  residual orders of the approximate solution on the torus
  lift-check    stereographic lift property suite
  simulate      zonal blow-up simulation on the sphere
  all           every acceptance criterion (use --quick for reduced resolution)

Run `ybl SUBCOMMAND --help` for options.
"""

# Per-subcommand defaults applied before the config file and command-line overrides.
DEFAULTS = {
    "odes": {"t0": "10", "tmax": "1000"},
    "simulate": {"t0": "6", "tmax": "1000"},
}


# --- output -----------------------------------------------------------------------------

def atomic_write(path, text):
    """Write ``text`` to ``path`` through a temporary file in the same directory and a rename."""
    path = os.path.abspath(path)
    folder = os.path.dirname(path)
    os.makedirs(folder, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=folder, prefix=".tmp-", suffix=os.path.basename(path))
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _num(x):
    x = float(x)
    return repr(x) if math.isfinite(x) else ("nan" if math.isnan(x) else ("inf" if x > 0 else "-inf"))


def csv_text(header, rows):
    lines = [",".join(header)]
    lines += [",".join(_num(v) for v in row) for row in rows]
    return "\n".join(lines) + "\n"


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, (np.floating, float)):
        x = float(obj)
        return x if math.isfinite(x) else str(x)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, Check):
        return obj.as_dict()
    return obj


def json_text(report):
    return json.dumps(_jsonable(report), indent=2, sort_keys=True) + "\n"


def report(command, cfg, checks, data=None):
    return {
        "command": command,
        "dim": cfg.dim,
        "pass": all(c.passed for c in checks),
        "checks": {c.name: c.as_dict() for c in checks},
        "data": data or {},
    }


# --- subcommands ---------------------------------------------------------------------------

def cmd_constants(cfg):
    from .quadrature import compute_constants, verify_cancellations, verify_identity_c2

    N = cfg.dim
    table = compute_constants(N)
    tol = cfg.tolerance("residual", cfg.tol)
    res = verify_cancellations(N, table)
    checks = [below(f"residual_{k}", r, tol) for k, r in zip(("S", "h", "green_S", "green_h"), res)]
    checks.append(below("c2_identity", verify_identity_c2(N, table), cfg.tolerance("c2_identity", 1e-9)))
    data = {k: {"value": getattr(table, k).value, "error": getattr(table, k).error}
            for k in ("c1", "c2", "c3", "c4", "c5")}
    data.update({k: str(getattr(table, k)) for k in ("hc1", "hc2", "hc3")})
    return report("constants", cfg, checks, data), None


def cmd_correction(cfg):
    from .profile import CurvatureData, equation_residual, solve_Q0

    N = cfg.dim
    ric = cfg.ricci()
    curv = CurvatureData(ric, float(np.trace(ric)), cfg.h)
    prof = solve_Q0(N, curv, rmax=cfg.rmax, nodes=cfg.nodes)
    r = prof.grid.r
    hi = min(1e4, cfg.rmax)
    probe = np.geomspace(1e2, hi, 41)
    ratio = np.abs(prof.radial("q0", probe)) * probe ** (N - 2) / np.log(2 + probe)
    res = equation_residual(prof)
    checks = [
        below("decay_ratio_spread", ratio.max() / ratio.min(), cfg.tolerance("decay_ratio_spread", 3.0)),
        below("residual_q0", res[0], cfg.tolerance("residual", 1e-6)),
        below("residual_q2", res[1], cfg.tolerance("residual", 1e-6)),
        below("condition", prof.condition, cfg.tolerance("condition", 1e8)),
    ]
    data = {"q0_at_0": float(prof.q0[0]), "tau": float(prof.tau), "ratio_min": ratio.min(), "ratio_max": ratio.max()}
    table = csv_text(["r", "q0", "q2"], zip(r, prof.q0, prof.q2))
    return report("correction", cfg, checks, data), table


def cmd_odes(cfg):
    from .dynamics import RicciMatrix, mu_bar, rk4, solve_lambda, solve_xi, stability_predicate

    N, h0 = cfg.dim, cfg.h
    ex = cfg.exponents
    t0, tmax = cfg.t0[0], cfg.tmax
    t = np.geomspace(t0, tmax, 20 * max(1, round(math.log10(tmax / t0))) + 1)
    amp_l, amp_x = cfg.forcing_amplitudes()
    f = lambda s: amp_l * np.asarray(s, float) ** (-(ex.nu1 + 2) / 2)
    direction = np.ones(N) / math.sqrt(N)
    fx = lambda s: np.outer(amp_x * np.asarray(s, float) ** (-(ex.nu2 + 2) / 2), direction)
    lam, _ = solve_lambda(f, t0, t)
    ric = cfg.ricci()
    rm = RicciMatrix.from_ricci(N, ric, h0)
    xi, _ = solve_xi(fx, rm, ex.nu2, t0, t)
    mb = mu_bar(N, h0, t)
    mu = mb + lam
    if np.any(mu <= 0):
        raise NumericError("forcing drives the dilation negative", t=float(t[np.argmax(mu <= 0)]))

    tol = cfg.tolerance("rk4", 1e-6)
    checks = []
    ref = rk4(lambda s, y: f(s) - 1.5 * y / s, [0.0], t, substeps=64)[:, 0]
    if np.any(ref):
        checks.append(below("lambda_vs_rk4", np.max(np.abs(lam - ref)) / np.max(np.abs(ref)), tol))
    ref = rk4(lambda s, y: fx(np.array([s]))[0] - rm.m @ y / s, xi[0], t, substeps=64)
    if np.any(ref):
        checks.append(below("xi_vs_rk4", np.max(np.abs(xi - ref)) / np.max(np.abs(ref)), tol))
    last = t >= t[-1] / 10
    slope = np.polyfit(np.log(t[last]), np.log(mu[last]), 1)[0]
    checks.append(near("mu_rate", slope, -0.5, cfg.tolerance("mu_rate", 0.05)))

    data = {"mu_slope": slope}
    if np.any(lam):
        data["lambda_slope"] = np.polyfit(np.log(t[last]), np.log(np.abs(lam[last])), 1)[0]
    xin = np.linalg.norm(xi, axis=1)
    if np.any(xin):
        data["xi_slope"] = np.polyfit(np.log(t[last]), np.log(xin[last]), 1)[0]
        data["xi_scaled_sup"] = float(np.max(xin * t ** (1 - ex.eps0)))
    stab = stability_predicate(N, ric, h0)
    data["stable"] = stab.stable
    data["min_sigma"] = float(stab.min_sigma)
    header = ["t", "mu", "lambda"] + [f"xi_{i + 1}" for i in range(N)]
    table = csv_text(header, (np.concatenate([[a, b, c], x]) for a, b, c, x in zip(t, mu, lam, xi)))
    return report("odes", cfg, checks, data), table


def cmd_greens(cfg):
    from .manifolds import Torus, TorusGreen, expand_P

    if cfg.model != "torus":
        raise DomainError("greens expansion is implemented for the flat torus only")
    N = cfg.dim
    green = TorusGreen(Torus(N), cfg.h, cfg.center())
    fit = expand_P(green, cfg.radii, seed=cfg.seed)
    C = fit.finest
    diag = np.diag(C)
    off = np.max(np.abs(C - np.diag(diag)))
    checks = [
        below("diagonal_rel", np.max(np.abs(diag / fit.target - 1)), cfg.tolerance("diagonal_rel", 0.02)),
        below("offdiag_rel", off / np.mean(np.abs(diag)), cfg.tolerance("offdiag_rel", 1e-3)),
    ]
    if N == 5:
        checks.append(near("order", fit.order, 1.0, cfg.tolerance("order", 0.2)))
    data = {"coefficients": C, "target": fit.target, "order": fit.order}
    rows = [(r, np.trace(c) / N, np.max(np.abs(c - np.diag(np.diag(c)))), res)
            for r, c, res in zip(fit.radii, fit.coefficients, fit.residuals)]
    table = csv_text(["radius", "diag_mean", "offdiag_max", "fit_residual"], rows)
    return report("greens", cfg, checks, data), table


def cmd_approx_error(cfg):
    from .approximate import aronson_benilan_ratio, build_approx, model_state, verify_error_orders
    from .manifolds import Torus

    if cfg.model != "torus":
        raise DomainError("pointwise residual orders are measured on the flat torus")
    N = cfg.dim
    times = sorted(cfg.t0)
    if len(times) < 2:
        raise DomainError("approx-error needs at least two times in t0")
    approx = build_approx(Torus(N), cfg.h, [cfg.center()], [lambda t: model_state(N, cfg.h, t)],
                          level=cfg.level, delta0=cfg.delta0)
    inner = verify_error_orders(approx, times, region="inner", eps1=cfg.eps1, seed=cfg.seed)
    outer = verify_error_orders(approx, times, region="outer", eps1=cfg.eps1, seed=cfg.seed)
    ab = [aronson_benilan_ratio(approx, t, seed=cfg.seed) for t in times]
    checks = [at_least("inner_order", inner.order, cfg.tolerance("inner_order", 2.7))]
    data = {
        "times": times,
        "inner_order": inner.order,
        "outer_order": outer.order,
        "ab_ratio": ab,
        "norms": {"inner_sup": inner.values, "outer_sup": outer.values},
    }
    return report("approx-error", cfg, checks, data), None


def cmd_lift_check(cfg):
    from .stereographic import mode_rate, to_plane, to_sphere, verify_conformal_covariance

    N = cfg.dim
    rng = np.random.default_rng(cfg.seed)
    y = rng.standard_normal((2000, N))
    y *= np.geomspace(1e-6, 1e6, 2000)[:, None] / np.linalg.norm(y, axis=1, keepdims=True)
    back = to_plane(to_sphere(y))
    roundtrip = float(np.max(np.linalg.norm(back - y, axis=1) / np.linalg.norm(y, axis=1)))
    checks = [below("round_trip", roundtrip, cfg.tolerance("round_trip", 1e-13))]
    checks += acceptance.lift_checks(N, cfg.quick)
    cov = verify_conformal_covariance(N, seed=cfg.seed)
    checks.append(below("covariance_fd", cov, cfg.tolerance("covariance_fd", 1e-6)))
    rates = [mode_rate(N, l) for l in range(2, 65)]
    checks.append(below("max_decay_rate_l_ge_2", max(rates), 0.0))
    data = {"mode_rate_l1": mode_rate(N, 1), "mode_rate_l2": mode_rate(N, 2)}
    return report("lift-check", cfg, checks, data), None


def cmd_simulate(cfg):
    from .flow import ThetaGrid, run_blowup

    N = cfg.dim
    run = run_blowup(N, cfg.h, cfg.t0[0], cfg.tmax, grid=ThetaGrid(N, cfg.grid))
    checks = acceptance.simulation_checks(run)
    slope, amp = run.rate_fit()
    data = {"rate_slope": slope, "amplitude": amp,
            "amplitude_target": acceptance.rate_amplitude(N, cfg.h),
            "core_deviation": run.core_deviation(), "steps": len(run.rows) - 1,
            "final_t": run.final.t}
    cols = ["t", "mu_fit", "max_u", "min_u", "ab_ratio", "energy"]
    table = csv_text(cols, ([r[c] for c in cols] for r in run.rows))
    return report("simulate", cfg, checks, data), table


def rate_plot_text(csv):
    """Whitespace columns t and mu_fit*sqrt(t) from a simulate CSV (gnuplot-ready)."""
    lines = csv.strip().split("\n")[1:]
    out = ["# t mu_fit*sqrt(t)"]
    for line in lines:
        t, mu = (float(v) for v in line.split(",")[:2])
        out.append(f"{_num(t)} {_num(mu * math.sqrt(t))}")
    return "\n".join(out) + "\n"


def cmd_all(cfg, log=print):
    threads = thread_cap()
    crits = acceptance.CRITERIA
    with ThreadPoolExecutor(max_workers=threads) as pool:
        futures = [pool.submit(fn, cfg.quick) for fn in crits]
        results = []
        for fut in futures:
            crit = fut.result()
            log(crit.line())
            results.append(crit)
    checks = [Check(f"criterion_{c.number}", float(c.passed), 1.0, c.passed) for c in results]
    data = {str(c.number): c.as_dict() for c in results}
    rep = report("all", cfg, checks, data)
    rep["quick"] = cfg.quick
    return rep, None


HANDLERS = {
    "constants": cmd_constants,
    "correction": cmd_correction,
    "odes": cmd_odes,
    "greens": cmd_greens,
    "approx-error": cmd_approx_error,
    "lift-check": cmd_lift_check,
    "simulate": cmd_simulate,
    "all": cmd_all,
}


# --- argument handling -----------------------------------------------------------------------

OPTIONS = {
    "dim": int, "model": str, "h": str, "t0": str, "tmax": str, "level": str, "grid": str,
    "rmax": str, "nodes": str, "radii": str, "z0": str, "ric": str, "forcing": str, "tol": str,
    "eps0": str, "eps1": str, "sigma0": str, "a": str, "b": str, "alpha": str, "beta": str,
    "rho": str, "delta0": str, "seed": str, "out": str, "json": str,
}


def build_parser(command):
    ap = argparse.ArgumentParser(prog=f"ybl {command}", description=f"Run the {command} experiment.")
    ap.add_argument("--config", help="flat key = value configuration file")
    ap.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                    help="override one configuration key (repeatable)")
    ap.add_argument("--quick", action="store_true", help="reduced resolution")
    ap.add_argument("--dump-config", action="store_true", help="print the resolved configuration and exit")
    for name, kind in OPTIONS.items():
        ap.add_argument(f"--{name}", type=kind, default=None)
    return ap


def resolve_config(command, args):
    overrides = dict(DEFAULTS.get(command, {}))
    cfg_file = args.config
    # explicit flags beat --set, which beats the file, which beats subcommand defaults
    cfg = apply_pairs(ExperimentConfig(), overrides)
    if cfg_file:
        cfg = apply_pairs(cfg, read_pairs(cfg_file))
    sets = {}
    for item in args.set:
        if "=" not in item:
            raise DomainError(f"--set expects KEY=VALUE, got {item!r}")
        k, v = item.split("=", 1)
        sets[k.strip()] = v.strip()
    flags = {k: str(v) for k, v in vars(args).items() if k in OPTIONS and v is not None}
    cfg = apply_pairs(cfg, {**sets, **flags})
    if args.quick:
        cfg = apply_pairs(cfg, {"quick": "true"})
    return cfg


def main(argv=None):
    argv = list(sys.argv[1:] if argv is None else argv)
    if not argv or argv[0] in ("-h", "--help"):
        sys.stdout.write(USAGE)
        return 0 if argv else 64
    command = argv[0]
    if command not in SUBCOMMANDS:
        sys.stderr.write(f"ybl: unknown subcommand {command!r}\n\n{USAGE}")
        return 64
    args = build_parser(command).parse_args(argv[1:])
    try:
        cfg = resolve_config(command, args)
        if args.dump_config:
            sys.stdout.write(dump_pairs(cfg))
            return 0
        cfg.validate()
        rep, table = HANDLERS[command](cfg)
        text = json_text(rep)
        if cfg.json:
            atomic_write(cfg.json, text)
        if table is not None and cfg.out:
            atomic_write(cfg.out, table)
            if command == "simulate":
                stem, _ = os.path.splitext(cfg.out)
                atomic_write(stem + "_rate.dat", rate_plot_text(table))
        sys.stdout.write(text)
        return 0
    except (DomainError, OSError, ValueError) as exc:
        sys.stderr.write(f"ybl {command}: invalid input: {exc}\n")
        return 2
    except (NumericError, FloatingPointError, np.linalg.LinAlgError) as exc:
        sys.stderr.write(f"ybl {command}: numerical failure: {exc}\n")
        details = getattr(exc, "details", None)
        if details:
            sys.stderr.write(json_text(details))
        return 3


if __name__ == "__main__":
    sys.exit(main())
