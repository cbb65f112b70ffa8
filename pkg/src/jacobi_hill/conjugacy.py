"""Conjugate points along geodesics and the count N over a closed geodesic.

Two detectors are provided. The direct one integrates the normal Jacobi
solution with n(t_a) = 0, n_dot(t_a) = 1 and records its simple zeros. The
caustic one reads the normal frame coefficient of sgrad F, which vanishes
exactly where the trajectory touches a caustic of its Liouville torus;
consecutive contacts are conjugate to each other.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy.optimize import brentq

from .errors import CriticalTorusError, PeriodError, ToleranceError
from .flow import frame_decompose, integrate_geodesic, sgrad_integral
from .jacobi import integrate_jacobi_frame

SCAN_STEP = 1e-2
BISECT_TOL = 1e-10
GRAZE_TOL = 1e-9
SIMPLE_TOL = 1e-8
PERIOD_END_TOL = 1e-7


@dataclass
class ConjugateReport:
    """Conjugate times after a base time, with the bracket of each zero."""

    base_time: float
    conjugate_times: list
    brackets: list
    N: Optional[int]
    parity: str
    method: str
    base_point: list = field(default_factory=list)
    window: float = None
    slopes: list = field(default_factory=list)
    warnings: list = field(default_factory=list)
    residuals: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.N is not None and self.method != "caustic" and self.N != len(self.conjugate_times):
            raise ValueError("N must match the number of conjugate times")

    def to_dict(self):
        return {
            "base_time": self.base_time,
            "base_point": list(self.base_point),
            "window": self.window,
            "conjugate_times": list(self.conjugate_times),
            "brackets": [list(b) for b in self.brackets],
            "slopes": list(self.slopes),
            "N": self.N,
            "parity": self.parity,
            "method": self.method,
            "warnings": list(self.warnings),
            "residuals": dict(self.residuals),
        }

    def dumps(self):
        return json.dumps(self.to_dict(), indent=2, sort_keys=True, default=float)


def parity_of(N):
    if N is None:
        return "n/a"
    return "even" if N % 2 == 0 else "odd"


def scan_step(traj, step=None):
    if step is not None:
        return float(step)
    period = getattr(traj, "period", None)
    return min(SCAN_STEP, period / 1000.0) if period else SCAN_STEP


def _zeros(fn, t0, t1, step):
    """Sign changes of ``fn`` on [t0, t1] (either orientation), refined by bisection.

    Returns (times, brackets, grazes); ``grazes`` are sample times where
    |fn| dips below the grazing tolerance without changing sign.
    """
    n = max(2, int(math.ceil(abs(t1 - t0) / step)))
    ts = np.linspace(t0, t1, n + 1)
    vals = np.array([fn(t) for t in ts])
    times, brackets, grazes = [], [], []
    for i in range(n):
        a, b = ts[i], ts[i + 1]
        va, vb = vals[i], vals[i + 1]
        if va * vb < 0 or (vb == 0.0 and i < n - 1):
            if vb == 0.0:
                tz = b
                lo, hi = b, b
            else:
                lo, hi = (a, b) if a < b else (b, a)
                tz = brentq(fn, lo, hi, xtol=BISECT_TOL, rtol=4 * np.finfo(float).eps)
                lo, hi = tz - BISECT_TOL, tz + BISECT_TOL
            times.append(float(tz))
            brackets.append((float(lo), float(hi)))
        elif 0 < i < n and abs(va) < GRAZE_TOL and abs(va) <= abs(vals[i - 1]) and abs(va) <= abs(vb):
            grazes.append(float(a))
    return times, brackets, grazes


def find_conjugate_points(metric, traj, t_a=None, window=None, step=None, tol=1e-11,
                          include_end=False) -> ConjugateReport:
    """Conjugate times of ``t_a`` in (t_a, t_a + window].

    ``window`` may be negative to search backwards. The normal solution is
    integrated from (n, n_dot, horiz, a) = (0, 1, 0, 0) and scanned at
    ``step`` (default min(1e-2, period/1000)). With ``include_end`` a zero
    sitting exactly at the end of the window (self-conjugacy at a period)
    is also counted when |n| there is below 1e-7 and the zero is simple.
    """
    t_a = traj.t0 if t_a is None else float(t_a)
    if window is None:
        window = traj.t1 - t_a
    t_b = t_a + window
    lo, hi = sorted(traj.t_span)
    margin = 0.0
    h = scan_step(traj, step)
    if include_end:
        direction = 1.0 if window > 0 else -1.0
        margin = direction * min(2 * h, max(0.0, (hi - t_b) if direction > 0 else (t_b - lo)))
    if not (lo - 1e-9 <= t_a <= hi + 1e-9 and lo - 1e-9 <= t_b <= hi + 1e-9):
        raise ValueError(f"window [{t_a}, {t_b}] outside trajectory span {traj.t_span}")
    evo = integrate_jacobi_frame(traj, [0.0, 1.0, 0.0, 0.0], t_end=t_b + margin, t_start=t_a, tol=tol)
    start = t_a + math.copysign(min(h, abs(window)) * 1e-3, window)
    times, brackets, grazes = _zeros(evo.n, start, t_b + margin, h)
    keep = [i for i, t in enumerate(times) if (t - t_b) * math.copysign(1.0, window) <= 1e-9]
    times = [times[i] for i in keep]
    brackets = [brackets[i] for i in keep]
    warnings = [f"near-grazing |n| < {GRAZE_TOL:g} without sign change at t = {g:.12g}" for g in grazes]
    if include_end and (not times or abs(times[-1] - t_b) > 1e-9):
        n_end, nd_end = evo.n(t_b), evo.n_dot(t_b)
        if abs(n_end) < PERIOD_END_TOL and abs(nd_end) > SIMPLE_TOL:
            times.append(float(t_b))
            brackets.append((float(t_b) - abs(n_end / nd_end), float(t_b) + abs(n_end / nd_end)))
            warnings.append(f"self-conjugate at the window end (n = {n_end:.3g})")
    slopes = [float(evo.n_dot(t)) for t in times]
    for t, s in zip(times, slopes):
        if abs(s) <= SIMPLE_TOL:
            raise ToleranceError(f"zero at t = {t:.12g} is not simple (n_dot = {s:.3g})")
    return ConjugateReport(
        base_time=t_a,
        conjugate_times=times,
        brackets=brackets,
        N=len(times),
        parity=parity_of(len(times)),
        method="jacobi-zeros",
        base_point=[float(v) for v in traj(t_a)],
        window=float(window),
        slopes=slopes,
        warnings=warnings,
        residuals={"bisection_tol": BISECT_TOL, "scan_step": h},
    )


def first_conjugate_time(metric, traj, t_a, window, step=None):
    rep = find_conjugate_points(metric, traj, t_a, window, step=step)
    return rep.conjugate_times[0] if rep.conjugate_times else None


def symmetry_check(metric, traj, t_a, t_b, step=None):
    """|t_a - first backward conjugate of t_b|, or inf if none is found."""
    lo, hi = sorted(traj.t_span)
    target = t_a + 0.05 * (t_a - t_b)
    target = min(max(target, lo), hi)
    back = find_conjugate_points(metric, traj, t_b, target - t_b, step=step)
    if not back.conjugate_times:
        return math.inf
    return abs(back.conjugate_times[0] - t_a)


# --------------------------------------------------------------------------
# Closed geodesics
# --------------------------------------------------------------------------


def return_period(metric, p0, t_max, tol=1e-10, closure_tol=1e-6):
    """First return time of a closed trajectory through ``p0``.

    The section is the line through the base point orthogonal to the initial
    velocity; sign changes of (q(t) - q0) . v0 with the same crossing sense
    are bisected and the first one that closes the orbit in phase space is
    returned with the trajectory.
    """
    p0 = np.asarray(p0, float)
    traj = integrate_geodesic(metric, p0, (0.0, t_max), tol=tol)
    v0 = traj.velocity(0.0)

    def g(t):
        return float(np.dot(traj(t)[:2] - p0[:2], v0))

    ts = np.linspace(0.0, t_max, int(t_max / 1e-2) + 2)
    vals = np.array([g(t) for t in ts])
    for i in range(5, len(ts) - 1):
        if vals[i] < 0 <= vals[i + 1]:
            T = brentq(g, ts[i], ts[i + 1], xtol=1e-13)
            gap = float(np.max(np.abs(traj(T) - p0)))
            if gap < closure_tol:
                return T, traj
    raise PeriodError(f"no closed return within t <= {t_max}")


def count_N(metric, traj, period=None, base_times=None, seed=0, step=None) -> ConjugateReport:
    """N over one period with base-point independence checked.

    ``traj`` must span at least [0, 2 * period]. The count at the first
    base time is returned; the counts at all base times are recorded in
    ``residuals['base_counts']`` and a mismatch raises :class:`ToleranceError`.
    """
    period = getattr(traj, "period", None) if period is None else period
    if not period:
        raise PeriodError("closed geodesic without a known period")
    if base_times is None:
        rng = np.random.default_rng(seed)
        base_times = [traj.t0] + list(traj.t0 + rng.uniform(0.0, period, 2))
    reps = [find_conjugate_points(metric, traj, t, period, step=step, include_end=True) for t in base_times]
    counts = [r.N for r in reps]
    rep = reps[0]
    rep.residuals["base_times"] = [float(t) for t in base_times]
    rep.residuals["base_counts"] = counts
    rep.residuals["period"] = float(period)
    if len(set(counts)) != 1:
        raise ToleranceError(f"N depends on the base point: {counts}")
    return rep


def check_parity(metric, circle, periods=3, seed=0):
    """N for a saddle circle together with its orientability; orientable forces N even."""
    from .saddle import circle_trajectory, orientability

    traj = circle_trajectory(metric, circle, periods=periods)
    rep = count_N(metric, traj, seed=seed)
    orient = orientability(metric, circle)
    rep.residuals["orientable"] = bool(orient)
    if orient and rep.N % 2:
        raise ToleranceError(f"{circle.label}: orientable circle with odd N = {rep.N}")
    return rep, orient


# --------------------------------------------------------------------------
# Caustic construction
# --------------------------------------------------------------------------


def normal_component_sgrad_F(metric, traj, t):
    """D_2 coefficient of sgrad F at traj(t)."""
    p = traj(t)
    return frame_decompose(metric, p, sgrad_integral(metric, p)).c_2


def caustic_conjugates(metric, traj, t0=None, t1=None, step=None, critical_tol=1e-9) -> ConjugateReport:
    """Caustic contacts along ``traj`` and the conjugate pairs they form.

    ``conjugate_times`` lists every contact; ``brackets`` holds the
    consecutive pairs (t_i, t_{i+1}). Raises :class:`CriticalTorusError`
    when the normal component vanishes identically.
    """
    if not hasattr(metric, "quadratic_integral"):
        raise TypeError("caustic construction needs a metric with a quadratic integral")
    t0 = traj.t0 if t0 is None else t0
    t1 = traj.t1 if t1 is None else t1
    h = scan_step(traj, step)
    fn = lambda t: normal_component_sgrad_F(metric, traj, t)
    samples = np.linspace(t0, t1, 257)
    scale = max(np.max(np.abs(sgrad_integral(metric, traj(t)))) for t in samples[::16])
    if max(abs(fn(t)) for t in samples) <= critical_tol * max(1.0, scale):
        raise CriticalTorusError("sgrad F is tangential along the whole trajectory (critical torus)")
    times, _, grazes = _zeros(fn, t0, t1, h)
    pairs = [(times[i], times[i + 1]) for i in range(len(times) - 1)]
    warnings = [f"near-grazing normal component at t = {g:.12g}" for g in grazes]
    return ConjugateReport(
        base_time=float(t0),
        conjugate_times=times,
        brackets=pairs,
        N=len(pairs),
        parity="n/a",
        method="caustic",
        base_point=[float(v) for v in traj(t0)],
        window=float(t1 - t0),
        warnings=warnings,
        residuals={"scan_step": h},
    )


def cross_validate_caustics(metric, traj, report: ConjugateReport, tol=1e-6):
    """Max |t_{i+1} - first direct conjugate of t_i| over the caustic pairs."""
    worst = 0.0
    for ta, tb in report.brackets:
        rep = find_conjugate_points(metric, traj, ta, min(traj.t1 - ta, 1.5 * (tb - ta)))
        if not rep.conjugate_times:
            return math.inf
        worst = max(worst, abs(rep.conjugate_times[0] - tb))
    if worst > tol:
        raise ToleranceError(f"caustic and direct conjugate times differ by {worst:.3g}")
    return worst


# --------------------------------------------------------------------------
# Standard test trajectories
# --------------------------------------------------------------------------


def torus_regular_start(metric, F0, x0=0.0, y0=0.5):
    """Unit-speed point on the Liouville torus F = F0 of a separable metric.

    Uses p_x^2 = f(x0) + F0 and p_y^2 = h(y0) - F0, so that
    H = 1/2 and F = F0 exactly.
    """
    fx, hy = float(metric.f(x0)), float(metric.h(y0))
    a, b = fx + F0, hy - F0
    if a < 0 or b < 0:
        raise ValueError(f"F0 = {F0} not reachable from ({x0}, {y0})")
    return np.array([x0, y0, math.sqrt(a), math.sqrt(b)])


def great_circle_start(x=0.3, y=-0.2):
    """Round-sphere chart point with unit velocity perpendicular to its position."""
    lam = 4.0 / (1.0 + x * x + y * y) ** 2
    r = math.hypot(x, y)
    s = math.sqrt(lam)
    return np.array([x, y, -s * y / r, s * x / r])
