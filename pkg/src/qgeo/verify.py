"""One-shot verification suite behind ``qgeo verify``."""

from __future__ import annotations

import logging
import time
from dataclasses import dataclass, field

import numpy as np

from . import apt, closed_forms, geometry, oracle
from .errors import QGeoError
from .models import three_state_family, three_state_two_level_slice
from .paths import ParamPath
from .transport import holonomy

log = logging.getLogger("qgeo")


@dataclass
class Check:
    name: str
    value: float = float("nan")
    threshold: float = float("nan")
    passed: bool = False
    status: str = "fail"
    detail: str = ""
    seconds: float = 0.0
    extra: dict = field(default_factory=dict)

    def as_dict(self):
        return {"name": self.name, "status": self.status, "value": self.value,
                "threshold": self.threshold, "detail": self.detail,
                "seconds": round(self.seconds, 3), **self.extra}


def default_path():
    """Smooth open path on the configuration torus that starts at rest."""
    return ParamPath.from_exprs(["0.4 + 1.2*ramp(s)",
                                 "0.3 + 0.6*ramp(s)**2 + 0.4*sin(pi*ramp(s))"])


def default_loop():
    """Closed loop on the configuration torus."""
    return ParamPath.fourier_loop([1.0, 2.0], [[[0.3, 0.1], [0.1, -0.2]],
                                               [[0.05, 0.0], [0.0, 0.05]]])


def _run(name, threshold, fn, compare="le"):
    """Run ``fn`` -> value (or (value, extra)); failures become report lines."""
    chk = Check(name=name, threshold=threshold)
    t0 = time.perf_counter()
    try:
        out = fn()
        value, extra = out if isinstance(out, tuple) else (out, {})
        chk.value, chk.extra = float(value), extra
        ok = value <= threshold if compare == "le" else value >= threshold
        chk.passed = bool(ok)
        chk.status = "pass" if ok else "fail"
    except (QGeoError, ValueError, ArithmeticError) as exc:
        chk.status, chk.detail = "error", f"{type(exc).__name__}: {exc}"
    chk.seconds = time.perf_counter() - t0
    log.info("%-28s %-5s value=%.3e threshold=%.1e %s", name, chk.status, chk.value,
             threshold, chk.detail)
    return chk


def run_suite(family, *, level=0, path=None, loop=None, seed=42, npoints=5,
              tol_ode=oracle.TOL_ODE, geom_kw=None, T_values=(25, 50, 100, 200),
              workers=1):
    """Run every check and return the list of :class:`Check` results."""
    rng = np.random.default_rng(seed)
    geom_kw = geom_kw or {}
    points = [family.sample(rng) for _ in range(npoints)]
    checks = []

    def hermiticity():
        worst = 0.0
        for x in points:
            q = geometry.qgt_at(family, x, level, **geom_kw)
            worst = max(worst, float(np.max(np.abs(q.h - q.h.conj().T))),
                        float(max(0.0, -np.min(np.linalg.eigvalsh(q.g)))))
        return worst

    checks.append(_run("qgt_hermiticity", 1e-10, hermiticity))

    reports = {}

    def residual(key):
        def fn():
            if not reports:
                for i, x in enumerate(points):
                    reports[i] = geometry.compatibility_check(family, x, level, **geom_kw)
            return max(r[key] for r in reports.values())
        return fn

    checks.append(_run("upsilon_symmetry", 1e-7, residual("symmetry")))
    checks.append(_run("compatibility_identity", 1e-6, residual("compatibility")))
    checks.append(_run("real_identity", 1e-6, residual("real_identity")))
    checks.append(_run("imag_identity", 1e-6, residual("imag_identity")))

    canon = three_state_family()
    canon_pts = [canon.sample(rng) for _ in range(20)]

    def closed_forms_check():
        worst = 0.0
        for xi in canon_pts:
            q = geometry.qgt_at(canon, xi, 0)
            worst = max(worst,
                        float(np.max(np.abs(q.g - closed_forms.three_state_metric(xi[2], xi[3])))),
                        float(np.max(np.abs(q.B - closed_forms.three_state_curvature()))))
        return worst

    checks.append(_run("closed_form_g_B", 1e-8, closed_forms_check))

    def reduction():
        fam = three_state_two_level_slice()
        worst = 0.0
        for _ in range(10):
            y = fam.sample(rng)
            g = geometry.qgt_at(fam, y, 0).g
            worst = max(worst, float(np.max(np.abs(g - closed_forms.two_level_metric(y[1])))))
        return worst

    checks.append(_run("two_level_reduction", 1e-8, reduction))

    if loop is not None:
        hol = {}

        def get_hol():
            if not hol:
                hol["h"] = holonomy(family, loop, level, tol=1e-10, **geom_kw)
            return hol["h"]

        def compat():
            H = get_hol()
            worst = 0.0
            for _ in range(3):
                u = rng.normal(size=family.nparams) + 1j * rng.normal(size=family.nparams)
                v = rng.normal(size=family.nparams) + 1j * rng.normal(size=family.nparams)
                before = np.vdot(u, H.h0 @ v)
                after = np.vdot(H.G @ u, H.h0 @ (H.G @ v))
                worst = max(worst, abs(after - before) / (np.linalg.norm(u) * np.linalg.norm(v)))
            return worst

        checks.append(_run("transport_compatibility", 1e-7, compat))
        checks.append(_run("holonomy_unitarity", 1e-7, lambda: get_hol().unitarity_residual()))
    else:
        checks.append(Check("transport_compatibility", status="skipped", passed=True,
                            detail="no closed loop"))

    if path is not None:
        def recurrence():
            worst = 0.0
            for s in (0.25, 0.5, 0.75):
                a = apt.local_expansion(family, path, level, s, 3, method="closed")
                b = apt.local_expansion(family, path, level, s, 3, method="recurrence")
                for k in (2, 3):
                    scale = max(1.0, float(np.max(np.abs(a.kets[k]))))
                    worst = max(worst, float(np.max(np.abs(a.kets[k] - b.kets[k]))) / scale)
            return worst

        checks.append(_run("recurrence_vs_closed_form", 1e-6, recurrence))
        system = apt.DrivenSystem(family, path, T_values[0], level=level)
        expansion = {}
        for p in (0, 1, 2):
            def conv(p=p):
                if not expansion:
                    expansion["e"] = apt.AdiabaticExpansion(family, path, level, 2)
                fit = oracle.order_check(system, p, T_values, expansion=expansion["e"],
                                         tol=tol_ode, workers=workers, reject=False)
                extra = {"r2": fit.r2, "errors": fit.errors.tolist()}
                if fit.exact:
                    return p + 1.0, extra
                if fit.r2 < oracle.R2_MIN:
                    return -np.inf, extra
                return fit.slope, extra
            checks.append(_run(f"convergence_p{p}", p + 0.7, conv, compare="ge"))
    else:
        checks.append(Check("convergence", status="skipped", passed=True,
                            detail="no open path"))
    return checks
