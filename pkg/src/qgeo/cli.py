"""Command-line entry point ``qgeo``.

Exit codes: 0 success, 1 check failure, 2 configuration error,
3 numerical abort (degenerate level, singular chart, integrator failure).
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from concurrent.futures import ThreadPoolExecutor

import numpy as np

from . import apt, geometry, io, oracle, verify
from .errors import ConfigError, FitRejected, NumericalAbort, QGeoError
from .models import DEFAULT_FD_STEP
from .transport import TOL_ODE as TRANSPORT_TOL
from .transport import geometric_phase, holonomy, transport

EXIT_OK, EXIT_CHECK, EXIT_CONFIG, EXIT_NUMERICAL = 0, 1, 2, 3

log = logging.getLogger("qgeo")


class _JsonFormatter(logging.Formatter):
    def format(self, record):
        return json.dumps({"level": record.levelname.lower(), "logger": record.name,
                           "message": record.getMessage()})


def _setup_logging(args):
    handler = logging.StreamHandler(sys.stderr)
    handler.setFormatter(_JsonFormatter() if args.json_logs
                         else logging.Formatter("%(levelname)s %(message)s"))
    log.handlers[:] = [handler]
    log.setLevel(logging.WARNING if args.quiet else logging.INFO)
    log.propagate = False


def workers():
    """Thread cap from QGEO_THREADS (default 1)."""
    raw = os.environ.get("QGEO_THREADS", "1")
    try:
        n = int(raw)
    except ValueError:
        raise ConfigError(f"QGEO_THREADS must be an integer, got {raw!r}") from None
    if n < 1:
        raise ConfigError("QGEO_THREADS must be at least 1")
    return n


def _positive(name):
    def conv(text):
        try:
            v = float(text)
        except ValueError:
            raise argparse.ArgumentTypeError(f"{name} must be a number") from None
        if not v > 0:
            raise argparse.ArgumentTypeError(f"{name} must be positive")
        return v
    return conv


def _model(args):
    return io.load_model(io.read_json(args.model) if args.model else None)


def _path(args, attr="path", default=None):
    fname = getattr(args, attr, None)
    if fname:
        return io.load_path(io.read_json(fname))
    if default is None:
        raise ConfigError(f"--{attr} is required for this model")
    return default


def _is_default_model(args):
    return not args.model


def _geom_kw(args):
    return {"gap_tol": args.gap_tol, "fd_step": args.fd_step}


def _write(args, obj, header=None, rows=None):
    out = getattr(args, "out", None)
    as_csv = args.csv or (out is not None and str(out).endswith(".csv"))
    if as_csv and header is not None:
        io.write_csv(out, header, rows)
    else:
        io.write_json(out, obj)


# -- subcommands -------------------------------------------------------------


def cmd_geometry(args):
    fam = _model(args)
    if args.points:
        pts = io.load_points(args.points, fam.nparams)
    else:
        rng = np.random.default_rng(args.seed)
        pts = np.array([fam.sample(rng) for _ in range(args.npoints)])
    kw = _geom_kw(args)

    def one(x):
        tf = geometry.covariant_frame(fam, x, args.level, gap_tol=kw["gap_tol"],
                                      fd_step=kw["fd_step"])
        q = geometry.qgt(tf)
        ch = geometry.christoffel(fam, x, args.level, raise_index=False,
                                  cond_max=args.cond_max, **kw)
        res = geometry.compatibility_check(fam, x, args.level, **kw)
        return {"x": x, "energy": tf.frame.energy, "gap": tf.frame.gap, "h": q.h, "g": q.g,
                "B": q.B, "berry_connection": tf.berry_conn, "upsilon": ch.first,
                "upsilon_second": ch.second, "h_cond": ch.h_cond, "residuals": res}

    with ThreadPoolExecutor(max_workers=workers()) as pool:
        results = list(pool.map(one, pts))
    if args.csv or (args.out and str(args.out).endswith(".csv")):
        header, rows = None, []
        for r in results:
            cols, vals = [], []
            for key in ("x", "h", "g", "B", "upsilon"):
                c, v = io.flatten(key, r[key])
                cols += c
                vals += v
            header = header or cols
            rows.append(vals)
        io.write_csv(args.out, header, rows)
    else:
        io.write_json(args.out, {"model": fam.name, "level": args.level, "points": results})
    return EXIT_OK


def cmd_transport(args):
    fam = _model(args)
    path = _path(args, default=verify.default_path() if _is_default_model(args) else None)
    if args.ket:
        v0 = io.parse_vector(io.read_json(args.ket), fam.nparams, "initial ket")
    else:
        v0 = np.eye(fam.nparams, dtype=complex)[0]
    s = np.linspace(0.0, 1.0, args.samples)
    res = transport(fam, path, args.level, v0, tol=args.tol_ode, s_eval=s,
                    cond_max=args.cond_max, **_geom_kw(args))
    header = ["s"] + [f"v[{k}].{part}" for k in range(fam.nparams) for part in ("re", "im")]
    rows = [[si] + [c for z in v for c in (z.real, z.imag)]
            for si, v in zip(res.s, res.trajectory)]
    _write(args, {"s": res.s, "v": res.trajectory, "final": res.final.v}, header, rows)
    return EXIT_OK


def cmd_holonomy(args):
    fam = _model(args)
    loop = _path(args, "loop", default=verify.default_loop() if _is_default_model(args) else None)
    H = holonomy(fam, loop, args.level, tol=args.tol_ode, cond_max=args.cond_max,
                 **_geom_kw(args))
    out = {"G": H.G, "h0": H.h0, "unitarity_residual": H.unitarity_residual()}
    if loop.closed:
        gp = geometric_phase(fam, loop, args.level, gap_tol=args.gap_tol)
        out.update(gamma=gp.gamma, winding=gp.winding, gamma_total=gp.total)
    header, row = ["unitarity_residual"], [out["unitarity_residual"]]
    if loop.closed:
        header += ["gamma", "winding", "gamma_total"]
        row += [gp.gamma, gp.winding, gp.total]
    for key in ("G", "h0"):
        c, v = io.flatten(key, out[key])
        header += c
        row += v
    _write(args, out, header, [row])
    return EXIT_OK


def cmd_apt(args):
    fam = _model(args)
    path = _path(args, default=verify.default_path() if _is_default_model(args) else None)
    s = io.parse_times(args.times)
    expn = apt.AdiabaticExpansion(fam, path, args.level, args.order, s, method=args.method,
                                  gap_tol=args.gap_tol)
    sol = expn.solution(args.T, args.hbar)
    system = sol.system
    samples = []
    for i, si in enumerate(s):
        entry = {"s": si, "t": sol.t[i], "phi": sol.phi[i], "gamma": sol.gamma[i],
                 "alpha": sol.alpha[i], "beta": sol.beta[i], "alpha_dot": sol.alpha_dot[i],
                 "beta_dot": sol.beta_dot[i], "kets": sol.kets[i], "state": sol.states[i]}
        if args.order >= 2 or args.response:
            r = apt.response(system, si)
            entry["response"] = {"mass2": r.mass2, "energy3": r.energy3,
                                 "en3_terms": list(r.en3_terms)}
        samples.append(entry)
    header, rows = None, []
    for e in samples:
        cols, vals = ["s", "t", "phi", "gamma"], [e["s"], e["t"], e["phi"], e["gamma"]]
        for key in ("alpha", "beta", "state"):
            c, v = io.flatten(key, e[key])
            cols += c
            vals += v
        if "response" in e:
            c, v = io.flatten("mass2", e["response"]["mass2"])
            cols += c + ["energy3"]
            vals += v + [e["response"]["energy3"]]
        header = header or cols
        rows.append(vals)
    _write(args, {"model": fam.name, "order": args.order, "T": args.T, "hbar": args.hbar,
                  "eps": system.eps, "samples": samples}, header, rows)
    return EXIT_OK


def cmd_convergence(args):
    fam = _model(args)
    path = _path(args, default=verify.default_path() if _is_default_model(args) else None)
    T_list = io.parse_float_list(args.T, "T values")
    system = apt.DrivenSystem(fam, path, T_list[0], args.hbar, args.level, args.gap_tol)
    s = io.parse_times(args.times)
    try:
        fit = oracle.order_check(system, args.order, T_list, s_values=s, tol=args.tol_ode,
                                 workers=workers())
        rejected = None
    except FitRejected as exc:
        fit, rejected = exc.fit, str(exc)
    passed = fit.passed() and rejected is None
    # CSV carries the per-T errors; the fit summary goes to the log
    _write(args, {"order": fit.p, "T": fit.T_values, "eps": fit.eps, "errors": fit.errors,
                  "errors_phase_min": fit.errors_phase_min, "slope": fit.slope,
                  "slope_phase_min": fit.slope_phase_min, "r2": fit.r2, "exact": fit.exact,
                  "pass": passed, "rejected": rejected},
           ["T", "eps", "error", "error_phase_min"],
           list(zip(fit.T_values, fit.eps, fit.errors, fit.errors_phase_min)))
    log.info("order %d: slope %.3f, r2 %.4f, pass %s", fit.p, fit.slope, fit.r2, passed)
    if rejected:
        log.warning(rejected)
    return EXIT_OK if passed else EXIT_CHECK


def cmd_verify(args):
    fam = _model(args)
    default = _is_default_model(args)
    path = _path(args, default=verify.default_path() if default else None) \
        if (args.path or default) else None
    loop = _path(args, "loop", default=verify.default_loop() if default else None) \
        if (args.loop or default) else None
    checks = verify.run_suite(fam, level=args.level, path=path, loop=loop, seed=args.seed,
                              tol_ode=args.tol_ode, geom_kw=_geom_kw(args), workers=workers())
    ok = all(c.passed for c in checks)
    _write(args, {"model": fam.name, "seed": args.seed, "pass": ok,
                  "checks": [c.as_dict() for c in checks]},
           ["name", "status", "value", "threshold", "seconds"],
           [[c.name, c.status, c.value, c.threshold, c.seconds] for c in checks])
    return EXIT_OK if ok else EXIT_CHECK


# -- parser ------------------------------------------------------------------


def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--model", help="model JSON file (default: builtin three-state "
                                        "model on its configuration torus)")
    common.add_argument("--level", type=int, default=0, help="tracked level (ascending)")
    common.add_argument("--seed", type=int, default=42)
    common.add_argument("--gap-tol", type=_positive("gap tolerance"), default=None)
    common.add_argument("--fd-step", type=_positive("fd step"), default=DEFAULT_FD_STEP)
    common.add_argument("--tol-ode", type=_positive("ODE tolerance"), default=None)
    common.add_argument("--cond-max", type=_positive("cond max"), default=1e10)
    common.add_argument("--out", default=None, help="output file (default: stdout)")
    common.add_argument("--csv", action="store_true", help="CSV instead of JSON")
    common.add_argument("--quiet", action="store_true")
    common.add_argument("--json-logs", action="store_true")

    p = argparse.ArgumentParser(prog="qgeo", description="Quantum geometry of parameter-"
                                "dependent states and adiabatic perturbation theory.")
    sub = p.add_subparsers(dest="command", required=True)

    g = sub.add_parser("geometry", parents=[common], help="QGT, Christoffel symbols, residuals")
    g.add_argument("--points", help="CSV of parameter points")
    g.add_argument("--npoints", type=int, default=1, help="random points when no --points")
    g.set_defaults(func=cmd_geometry, ode_default=TRANSPORT_TOL)

    t = sub.add_parser("transport", parents=[common], help="parallel transport of a tangent ket")
    t.add_argument("--path")
    t.add_argument("--ket", help="JSON list of components (numbers or [re, im])")
    t.add_argument("--samples", type=int, default=21)
    t.set_defaults(func=cmd_transport, ode_default=TRANSPORT_TOL)

    h = sub.add_parser("holonomy", parents=[common], help="holonomy and Berry phase of a loop")
    h.add_argument("--loop")
    h.set_defaults(func=cmd_holonomy, ode_default=TRANSPORT_TOL)

    a = sub.add_parser("apt", parents=[common], help="adiabatic perturbation theory")
    a.add_argument("--path")
    a.add_argument("--order", type=int, default=2)
    a.add_argument("--T", type=_positive("T"), default=50.0)
    a.add_argument("--hbar", type=_positive("hbar"), default=1.0)
    a.add_argument("--times", default="0:1:0.1", help="start:stop:step in units of T")
    a.add_argument("--method", choices=["recurrence", "closed"], default="recurrence")
    a.add_argument("--response", action="store_true", help="response tensors at every order")
    a.set_defaults(func=cmd_apt, ode_default=oracle.TOL_ODE)

    c = sub.add_parser("convergence", parents=[common], help="APT order check")
    c.add_argument("--path")
    c.add_argument("--order", type=int, default=2)
    c.add_argument("--T", default="25,50,100,200")
    c.add_argument("--hbar", type=_positive("hbar"), default=1.0)
    c.add_argument("--times", default="0:1:0.1")
    c.set_defaults(func=cmd_convergence, ode_default=oracle.TOL_ODE)

    v = sub.add_parser("verify", parents=[common], help="run the verification suite")
    v.add_argument("--path")
    v.add_argument("--loop")
    v.set_defaults(func=cmd_verify, ode_default=oracle.TOL_ODE)
    return p


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_CONFIG if exc.code else EXIT_OK
    _setup_logging(args)
    if args.tol_ode is None:
        args.tol_ode = args.ode_default
    if args.level < 0:
        log.error("config error: level must be non-negative")
        return EXIT_CONFIG
    try:
        order = getattr(args, "order", 0)
        if not 0 <= order <= apt.P_MAX:
            raise ConfigError(f"order must be in 0..{apt.P_MAX}")
        return args.func(args)
    except ConfigError as exc:
        log.error("config error: %s", exc)
        return EXIT_CONFIG
    except NumericalAbort as exc:
        log.error("numerical abort (%s): %s", type(exc).__name__, exc)
        return EXIT_NUMERICAL
    except QGeoError as exc:
        log.error("%s: %s", type(exc).__name__, exc)
        return EXIT_CHECK
    except IndexError as exc:
        log.error("config error: %s", exc)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
