"""Invariant suite behind the ``verify`` subcommand.

Each check returns a :class:`Check` with the measured value, its tolerance
and a verdict. All randomness flows from one seeded generator so repeated
runs are identical.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass
from typing import Optional

import numpy as np

from .errors import JacobiHillError, NotHyperbolicError
from .flow import (
    frame_compose,
    frame_decompose,
    hamiltonian,
    integrate_geodesic,
    frame_relations,
    lie_bracket_fd,
    numeric_poisson_bracket,
    quadratic_integral,
    unit_speed_point,
)
from .jacobi import integrate_jacobi_frame, integrate_normal_equation
from .metrics import (
    ConformalChartMetric,
    KolokoltsovSphereMetric,
    LiouvilleTorusMetric,
    SeparableMetric,
    branch_distance,
)


@dataclass
class Check:
    name: str
    value: Optional[float]
    tol: Optional[float]
    passed: bool
    detail: str = ""

    def to_dict(self):
        return asdict(self)

    def row(self):
        verdict = "PASS" if self.passed else "FAIL"
        val = "n/a" if self.value is None else f"{self.value:.3e}"
        tol = "n/a" if self.tol is None else f"{self.tol:.0e}"
        return f"{verdict}  {self.name:<40s} {val:>10s}  tol {tol:>6s}  {self.detail}"


def _check(name, value, tol, detail=""):
    return Check(name, float(value), tol, bool(value < tol), detail)


def random_base_point(metric, rng):
    """A chart point away from the edges of the metric's domain."""
    if isinstance(metric, ConformalChartMetric):
        x0, x1, y0, y1 = metric.domain
        sx, sy = 0.25 * (x1 - x0), 0.25 * (y1 - y0)
        return float(rng.uniform(x0 + sx, x1 - sx)), float(rng.uniform(y0 + sy, y1 - sy))
    L = metric.L
    while True:
        x, y = float(rng.uniform(0.0, 1.0)), float(rng.uniform(0.0, L))
        if not isinstance(metric, KolokoltsovSphereMetric) or branch_distance(x, y, L) > 0.05:
            return x, y


def random_phase_points(metric, n, rng, unit=True):
    """``n`` phase points; unit speed when ``unit``, else random energy."""
    pts = []
    for _ in range(n):
        x, y = random_base_point(metric, rng)
        ang = float(rng.uniform(0.0, 2.0 * math.pi))
        p = np.array(unit_speed_point(metric, x, y, ang))
        if not unit:
            p[2:] *= float(rng.uniform(0.5, 2.0))
        pts.append(p)
    return pts


def frame_commutator_error(metric, points, eps=1e-5):
    """Max over relations and points of |[V, W] - expected| / max(1, |expected|)."""
    worst = 0.0
    for _, V, W, expected in frame_relations(metric):
        for p in points:
            lhs = lie_bracket_fd(V, W, p, eps)
            rhs = expected(p)
            err = np.linalg.norm(lhs - rhs) / max(1.0, np.linalg.norm(rhs))
            worst = max(worst, float(err))
    return worst


def frame_roundtrip_error(metric, points, rng):
    worst = 0.0
    for p in points:
        v = rng.normal(size=4)
        back = frame_compose(metric, p, frame_decompose(metric, p, v))
        worst = max(worst, float(np.linalg.norm(back - v) / np.linalg.norm(v)))
    return worst


def equivalence_error(metric, p0, t_max=10.0):
    """Max |n_frame - n_direct| / max(1, |n_direct|) on [0, t_max] for n(0) = 0, n_dot(0) = 1."""
    traj = integrate_geodesic(metric, p0, (0.0, t_max), tol=1e-11)
    evo = integrate_jacobi_frame(traj, [0.0, 1.0, 0.0, 0.0])
    direct = integrate_normal_equation(traj, 0.0, 1.0, t_max)
    ts = np.linspace(0.0, t_max, 201)
    return float(max(abs(evo.n(t) - direct(t)[0]) / max(1.0, abs(direct(t)[0])) for t in ts)), traj


def arc_wronskian_drift(seg, samples=64):
    """(W at the segment start, max |W - W_start|) in arc length for u+, u-."""
    ells = np.linspace(0.0, seg.length, samples)
    vals = []
    for ell in ells:
        up, dup = seg.in_arc_length(ell, "+")
        um, dum = seg.in_arc_length(ell, "-")
        vals.append(up * dum - um * dup)
    vals = np.array(vals)
    return float(vals[0]), float(np.max(np.abs(vals - vals[0])))


def run_suite(metric, seed=0, n_points=20, n_traj=3, t_max=10.0):
    """All invariant checks that apply to ``metric``."""
    from .conjugacy import check_parity
    from .saddle import (
        closed_form_multipliers,
        closed_form_residual,
        enumerate_critical_circles,
        floquet_multipliers,
        fundamental_solution_torus,
    )

    rng = np.random.default_rng(seed)
    checks = []
    pts = random_phase_points(metric, n_points, rng, unit=False)
    checks.append(_check("frame commutators (rel. FD error)", frame_commutator_error(metric, pts), 1e-4))
    checks.append(_check("frame roundtrip", frame_roundtrip_error(metric, pts, rng), 1e-10))

    separable = isinstance(metric, SeparableMetric)
    if separable:
        H = lambda p: hamiltonian(metric, p)
        F = lambda p: quadratic_integral(metric, p)
        pb = max(abs(numeric_poisson_bracket(metric, H, F, p)) for p in pts)
        checks.append(_check("Poisson bracket {H, F}", pb, 1e-6))

    drift_H, drift_F, equiv = 0.0, 0.0, 0.0
    for p0 in random_phase_points(metric, n_traj, rng):
        err, traj = equivalence_error(metric, p0, t_max)
        dH, dF = traj.conservation_errors()
        drift_H = max(drift_H, dH)
        drift_F = max(drift_F, dF or 0.0)
        equiv = max(equiv, err)
    checks.append(_check("conservation of H", drift_H, 1e-8))
    if separable:
        checks.append(_check("conservation of F", drift_F, 1e-8))
    checks.append(_check("frame system vs n'' + K n = 0", equiv, 1e-6))

    if isinstance(metric, LiouvilleTorusMetric):
        circles = [c for c in enumerate_critical_circles(metric) if c.hyperbolic]
        for c in circles:
            fs = fundamental_solution_torus(metric, c)
            seg = fs.segments[0]
            res = closed_form_residual(metric, c, fs)
            checks.append(_check(f"closed form residual {c.label}", res, 1e-6))
            w0, dw = arc_wronskian_drift(seg)
            expected = fs.info["wronskian_arc_length"]
            checks.append(
                _check(f"Wronskian {c.label}", max(dw, abs(w0 - expected)), 1e-8, f"W = {w0:.10f}")
            )
            fl = floquet_multipliers(metric, c)
            mu = sorted(abs(float(np.real(m))) for m in fl.multipliers)
            cf = sorted(closed_form_multipliers(metric, c))
            gap = max(abs(a - b) / b for a, b in zip(mu, cf))
            checks.append(_check(f"Floquet vs closed form {c.label}", gap, 1e-6))
            rep, orient = check_parity(metric, c, seed=seed)
            ok = (not orient) or rep.N % 2 == 0
            checks.append(Check(f"parity {c.label}", float(rep.N), None, ok, f"N = {rep.N}, orientable = {orient}"))
        if not circles:
            checks.append(Check("hyperbolic circles", None, None, True, "none found"))

    if isinstance(metric, KolokoltsovSphereMetric):
        from .sphere import fundamental_solution_sphere

        try:
            fs, report = fundamental_solution_sphere(metric, require_hyperbolic=False)
        except JacobiHillError as exc:
            checks.append(Check("sphere gluing", None, None, False, str(exc)))
        else:
            gap = abs(report.trace - report.oracle_trace) / max(1.0, abs(report.oracle_trace))
            checks.append(_check("gamma_1 monodromy: closed form vs oracle", gap, 1e-6, report.kind))
            c1 = max(g["c1_mismatch"] for g in fs.gluing)
            checks.append(_check("gamma_1 C^1 gluing at junctions", c1, 1e-6))
        for c in enumerate_critical_circles(metric):
            if not c.hyperbolic:
                continue
            try:
                rep, orient = check_parity(metric, c, seed=seed)
            except NotHyperbolicError:
                continue
            ok = (not orient) or rep.N % 2 == 0
            checks.append(Check(f"parity {c.label}", float(rep.N), None, ok, f"N = {rep.N}, orientable = {orient}"))
    return checks
