"""Critical circles of separable metrics, Floquet data and closed-form solutions.

A critical circle of the quadratic integral sits over a critical point of
one of the separable functions. ``YCritical(y0)`` is the circle
``{y = y0, p_y = 0}``, traversed in x; ``XCritical(x0)`` is ``{x = x0,
p_x = 0}``, traversed in y. For a YCritical circle the metric restricted to
the circle is ``F(x) = f(x) + h(y0)`` and the transverse exponent is
``c = sqrt(h''(y0) / 2)``; for an XCritical circle the roles of (x, f) and
(y, h) swap.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
from scipy.integrate import quad, solve_ivp
from scipy.optimize import brentq

from .errors import (
    AlphaZeroError,
    AmbiguousHolonomyError,
    CertificationError,
    DegenerateMetricError,
    IntegrationError,
    NotHyperbolicError,
    PeriodError,
    ToleranceError,
)
from .flow import Trajectory, frame_decompose, hamilton_jacobian, quadratic_integral
from .jacobi import (
    CumulativeIntegral,
    LineFieldAB,
    ScalarSolution,
    alpha_beta,
    alpha_beta_from_Y,
    jacobi_hill_residual,
    project_to_normal_plane,
    solution_from_line_field,
)
from .metrics import KolokoltsovSphereMetric, SeparableMetric

MORSE_TOL = 1e-8
SCAN_GRID = 4096


@dataclass(frozen=True)
class SaddleCircle:
    """A critical circle of the quadratic integral.

    ``family`` is "x" for XCritical(position) and "y" for YCritical(position).
    """

    family: str
    position: float
    momentum_sign: int
    transverse_second_derivative: float
    hyperbolic: bool
    simple: bool = True
    orientable: Optional[bool] = True

    @property
    def label(self):
        kind = "XCritical" if self.family == "x" else "YCritical"
        sign = "+" if self.momentum_sign > 0 else "-"
        return f"{kind}({self.position:.12g}){sign}"

    def to_dict(self):
        return {
            "family": "XCritical" if self.family == "x" else "YCritical",
            "position": self.position,
            "momentum_sign": self.momentum_sign,
            "transverse_second_derivative": self.transverse_second_derivative,
            "hyperbolic": self.hyperbolic,
            "simple": self.simple,
            "orientable": self.orientable,
        }


# --------------------------------------------------------------------------
# Enumeration
# --------------------------------------------------------------------------


def _critical_points(expr, period, grid=SCAN_GRID):
    """Zeros of expr' on [0, period) by sign-change scan plus brentq."""
    d1 = expr.derivative(1)
    g = np.arange(grid) * (period / grid)
    vals = d1(g)
    roots = []
    for i in range(grid):
        a, b = g[i], g[i] + period / grid
        va, vb = vals[i], vals[(i + 1) % grid]
        if va == 0.0:
            roots.append(a)
        elif va * vb < 0:
            roots.append(brentq(lambda s: d1(s), a, b, xtol=1e-15))
    out = []
    for r in sorted(r % period for r in roots):
        if abs(r - period) < 1e-12 or abs(r) < 1e-13:
            r = 0.0
        if not any(min(abs(r - q), period - abs(r - q)) < 1e-9 for q in out):
            out.append(r)
    return out


def _is_constant(expr, period, n=256):
    vals = expr(np.arange(n) * (period / n))
    return float(np.ptp(vals)) < 1e-12 * max(1.0, float(np.max(np.abs(vals))))


def enumerate_critical_circles(metric: SeparableMetric):
    """All critical circles (both momentum signs) sorted by family and position.

    For a sphere metric only simple circles are listed, one representative
    per sigma-pair, with positions in the open half periods.

    Raises
    ------
    DegenerateMetricError
        If f or h is constant (linear integrability) or a critical point is
        not Morse.
    """
    sphere = isinstance(metric, KolokoltsovSphereMetric)
    out = []
    for family, expr, period in (("x", metric.f, 1.0), ("y", metric.h, metric.L)):
        if _is_constant(expr, period):
            raise DegenerateMetricError(f"{'f' if family == 'x' else 'h'} is constant: the flow is linearly integrable")
        d2 = expr.derivative(2)
        for s0 in _critical_points(expr, period):
            if sphere and not (0.0 < s0 < period / 2) or sphere and min(s0, abs(period / 2 - s0)) < 1e-9:
                continue
            second = float(d2(s0))
            if abs(second) <= MORSE_TOL:
                raise DegenerateMetricError(f"non-Morse critical point at {family} = {s0:.12g} (second derivative {second:.3g})")
            for sign in (1, -1):
                out.append(SaddleCircle(family, float(s0), sign, second, second > 0, True, True))
    return out


def hyperbolic_circles(metric):
    return [c for c in enumerate_critical_circles(metric) if c.hyperbolic]


# --------------------------------------------------------------------------
# Reduction of a circle to one chart parameter
# --------------------------------------------------------------------------


class CircleReduction:
    """Along-circle data: F(s), its derivative, c^2, period P, direction sign."""

    def __init__(self, metric: SeparableMetric, circle: SaddleCircle):
        self.metric = metric
        self.circle = circle
        if circle.family == "y":
            along, across, self.period = metric.f, metric.h, 1.0
        else:
            along, across, self.period = metric.h, metric.f, metric.L
        self.fixed = circle.position
        self.shift = float(across(circle.position))
        self._F = along
        self._F1 = along.derivative(1)
        self.c2 = float(across.derivative(2)(circle.position)) / 2.0
        self.sign = int(circle.momentum_sign)

    @property
    def c(self):
        if self.c2 <= 0:
            raise NotHyperbolicError(f"{self.circle.label} is elliptic (c^2 = {self.c2:.6g})")
        return math.sqrt(self.c2)

    def F(self, s):
        return self._F(s) + self.shift

    def dF(self, s):
        return self._F1(s)

    def sqrtF(self, s):
        return np.sqrt(self.F(s))

    def point(self, s):
        """Phase point(s) over chart parameter s on the unit level."""
        s = np.asarray(s, dtype=float)
        p = self.sign * self.sqrtF(s)
        fixed = np.full_like(s, self.fixed)
        zero = np.zeros_like(s)
        if self.circle.family == "y":
            return np.array([s, fixed, p, zero])
        return np.array([fixed, s, zero, p])

    def lambda_integral(self):
        """Lambda = int_0^P ds / sqrt(F)."""
        v, _ = quad(lambda s: 1.0 / self.sqrtF(s), 0.0, self.period, epsabs=1e-13, epsrel=1e-13, limit=200)
        return v

    def arc_period(self):
        """Length of the circle, int_0^P sqrt(F) ds."""
        v, _ = quad(self.sqrtF, 0.0, self.period, epsabs=1e-13, epsrel=1e-13, limit=200)
        return v


class PeriodicPrimitive:
    """G(s) = int_0^s g for a smooth P-periodic g, from its Fourier series.

    The sample count doubles until the trailing coefficients fall below
    1e-15 of the largest; evaluation is then spectrally accurate and smooth,
    which matters for finite-difference residual checks downstream.
    """

    def __init__(self, g, P, n=64, n_max=1 << 16):
        self.P = float(P)
        while True:
            s = np.arange(n) * (self.P / n)
            c = np.fft.rfft(g(s)) / n
            tail = np.max(np.abs(c[-max(2, n // 16):]))
            if tail < 1e-15 * np.max(np.abs(c)) or n >= n_max:
                break
            n *= 2
        self.n = n
        self.mean = float(c[0].real)
        k = np.arange(1, len(c))
        if n % 2 == 0:
            c = c.copy()
            c[-1] *= 0.5
        self._w = 2 * math.pi * k / self.P
        # g = mean + sum 2 Re(c_k e^{i w s}); integrate term by term
        self._a = 2 * c[1:] / (1j * self._w)
        self._shift = float(np.sum(self._a.real))

    def __call__(self, s):
        e = np.exp(1j * np.multiply.outer(np.asarray(s, float), self._w))
        return self.mean * np.asarray(s, float) + (e @ self._a).real - self._shift

    @property
    def period_integral(self):
        return self.mean * self.P


class PeriodicArcLength:
    """ell(s) = int_0^s sqrt(F), for all real s, with its Newton inverse."""

    def __init__(self, red: CircleReduction):
        self.red = red
        self.P = red.period
        self._fwd = PeriodicPrimitive(red.sqrtF, self.P)
        self.T = self._fwd.period_integral

    def ell(self, s):
        return float(self._fwd(s))

    def s_of(self, ell):
        s = ell * self.P / self.T
        for _ in range(50):
            step = (self.ell(s) - ell) / float(self.red.sqrtF(s))
            s -= step
            if abs(step) < 4e-16 * max(1.0, abs(s)):
                break
        return s


def circle_trajectory(metric, circle: SaddleCircle, t_span=None, periods=10) -> Trajectory:
    """The circle as a flow trajectory on H = 1/2, pinned to the circle.

    Flow time equals arc length; the chart parameter is recovered by Newton
    inversion of the arc-length integral, extended periodically. Integrating
    the full flow instead would leave an unstable circle within a few
    periods.
    """
    red = CircleReduction(metric, circle)
    arc = PeriodicArcLength(red)
    if t_span is None:
        t_span = (0.0, periods * arc.T)

    def dense(t):
        if np.ndim(t):
            return np.column_stack([dense(ti) for ti in np.asarray(t)])
        s = arc.s_of(red.sign * float(t))
        return red.point(s)

    ts = np.linspace(t_span[0], t_span[1], 65)
    states = dense(ts)
    traj = Trajectory(metric, dense, t_span, ts, states, 0.0, label=circle.label)
    traj.circle = circle
    traj.period = arc.T
    traj.reduction = red
    traj.arc = arc
    return traj


# --------------------------------------------------------------------------
# Floquet multipliers
# --------------------------------------------------------------------------


@dataclass
class FloquetResult:
    multipliers: np.ndarray
    monodromy: np.ndarray
    period: float
    kind: str

    @property
    def hyperbolic(self):
        return self.kind == "hyperbolic"


def classify_monodromy(M, tol=1e-6):
    tr = float(np.trace(M))
    if abs(tr) > 2.0 + tol:
        return "hyperbolic"
    if abs(tr) < 2.0 - tol:
        return "elliptic"
    return "parabolic"


def normal_monodromy(q: Callable, t0, T, rtol=1e-12):
    """Monodromy of n'' + q(t) n = 0 over [t0, t0 + T] in the basis (n, n')."""

    def rhs(t, s):
        qt = q(t)
        return [s[1], -qt * s[0], s[3], -qt * s[2]]

    sol = solve_ivp(rhs, (t0, t0 + T), [1.0, 0.0, 0.0, 1.0], method="DOP853", rtol=rtol, atol=rtol * 1e-3)
    if sol.status != 0:
        raise IntegrationError(sol.message)
    a, b, c, d = sol.y[:, -1]
    return np.array([[a, c], [b, d]])


def floquet_multipliers(metric, circle: SaddleCircle) -> FloquetResult:
    """Eigenvalues of the monodromy of the normal Jacobi equation over one period."""
    traj = circle_trajectory(metric, circle, periods=1)
    T = traj.period
    if not T > 0:
        raise PeriodError("nonpositive period")

    def q(t):
        x, y = traj(t)[:2]
        return metric.gauss_curvature(x, y)

    M = normal_monodromy(q, 0.0, T)
    mu = np.linalg.eigvals(M)
    mu = mu[np.argsort(-np.abs(mu))]
    if np.all(np.abs(mu.imag) < 1e-12):
        mu = mu.real
    return FloquetResult(mu, M, T, classify_monodromy(M))


def closed_form_multipliers(metric, circle: SaddleCircle):
    """exp(+-c Lambda) with Lambda = int_0^P ds / sqrt(F)."""
    red = CircleReduction(metric, circle)
    lam = red.lambda_integral()
    c = red.c
    return math.exp(c * lam), math.exp(-c * lam)


# --------------------------------------------------------------------------
# Transverse Hessian
# --------------------------------------------------------------------------


def transverse_hessian(metric, circle: SaddleCircle, s=0.1234, eps=1e-4):
    """Numeric 2x2 Hessian of F on the transversal disk through a circle point.

    The disk is parameterised by the transverse coordinate and momentum,
    with the along momentum solved from H = 1/2.
    """
    red = CircleReduction(metric, circle)
    sign = red.sign

    def G(u, pu):
        if circle.family == "y":
            x, y, py = s, red.fixed + u, pu
            px = sign * math.sqrt(metric.lam(x, y) - py**2)
        else:
            x, y, px = red.fixed + u, s, pu
            py = sign * math.sqrt(metric.lam(x, y) - px**2)
        return quadratic_integral(metric, (x, y, px, py))

    H = np.empty((2, 2))
    H[0, 0] = (G(eps, 0) - 2 * G(0, 0) + G(-eps, 0)) / eps**2
    H[1, 1] = (G(0, eps) - 2 * G(0, 0) + G(0, -eps)) / eps**2
    H[0, 1] = H[1, 0] = (G(eps, eps) - G(eps, -eps) - G(-eps, eps) + G(-eps, -eps)) / (4 * eps**2)
    return H


def saddle_by_hessian(metric, circle):
    """True iff the transverse Hessian of F is indefinite."""
    return bool(np.linalg.det(transverse_hessian(metric, circle)) < 0)


# --------------------------------------------------------------------------
# Invariant line fields
# --------------------------------------------------------------------------


@dataclass
class LineFields:
    """Certified invariant line fields along a hyperbolic circle.

    ``Y_plus(t)``, ``Y_minus(t)`` return 4-vectors already projected to
    <D_2, D_phi>; ``raw_plus``/``raw_minus`` are the unprojected branch
    tangents; ``candidates`` records every candidate with its diagnostics.
    """

    traj: Trajectory
    Y_plus: Callable
    Y_minus: Callable
    raw_plus: Callable
    raw_minus: Callable
    candidates: dict = field(default_factory=dict)

    def ab(self, which="+"):
        Y = self.Y_plus if which == "+" else self.Y_minus
        return alpha_beta_from_Y(self.traj.metric, self.traj, Y)


def _branch_tangent(red, sign):
    c = red.c
    if red.circle.family == "y":
        return lambda t: np.array([0.0, 1.0, 0.0, sign * c])
    return lambda t: np.array([1.0, 0.0, sign * c, 0.0])


def _literal_candidate(red, traj, sign):
    """The displayed field d_s +- sqrt(F)/sqrt(2) d_{p_s} along the circle."""

    def Y(t):
        p = traj(t)
        s = p[0] if red.circle.family == "y" else p[1]
        k = sign * math.sqrt(red.F(s)) / math.sqrt(2.0)
        if red.circle.family == "y":
            return np.array([1.0, 0.0, k, 0.0])
        return np.array([0.0, 1.0, 0.0, k])

    return Y


def _certify(metric, traj, Y, window, tol):
    ab = alpha_beta_from_Y(metric, traj, Y)
    samples = np.linspace(0.0, window, 33)
    amax = max(abs(ab.alpha(t)) for t in samples)
    info = {"max_abs_alpha": amax}
    if amax < 1e-12:
        info["certified"] = False
        info["reason"] = "alpha vanishes identically along the circle"
        return info
    try:
        sol, _ = solution_from_line_field(ab, 0.0, window, check=True, tol=tol)
        info["residual"] = sol.info["residual"]
        info["certified"] = True
    except AlphaZeroError as exc:
        info["certified"] = False
        info["reason"] = str(exc)
    except ToleranceError as exc:
        info["certified"] = False
        info["reason"] = str(exc)
    return info


def line_fields_on_saddle(metric, circle: SaddleCircle, tol=1e-5, traj=None) -> LineFields:
    """Invariant line fields Y+- along a hyperbolic circle.

    The candidates are the tangents to the two local branches of the
    critical Liouville fiber (``d_u +- c d_{p_u}`` in the transverse
    coordinate u) and the displayed along-circle field. Each is projected
    to <D_2, D_phi> along <A, D_1> and certified by the Jacobi-Hill residual
    of its exp(int beta/alpha) solution.

    Raises
    ------
    NotHyperbolicError
        For elliptic circles.
    CertificationError
        If the branch-tangent pair fails; ``candidates`` holds both.
    """
    if not circle.hyperbolic:
        raise NotHyperbolicError(f"{circle.label} is not hyperbolic")
    red = CircleReduction(metric, circle)
    traj = traj or circle_trajectory(metric, circle, periods=1)
    window = traj.period
    cands = {}
    fields = {}
    for name, builder in (("branch-tangent", lambda s: _branch_tangent(red, s)),
                          ("displayed", lambda s: _literal_candidate(red, traj, s))):
        for sign, label in ((1, "+"), (-1, "-")):
            raw = builder(sign)
            cands[f"{name}{label}"] = _certify(metric, traj, raw, window, tol)
            fields[(name, label)] = raw
    ok = cands["branch-tangent+"]["certified"] and cands["branch-tangent-"]["certified"]
    if not ok:
        raise CertificationError("branch-tangent line fields failed certification", cands)
    rp, rm = fields[("branch-tangent", "+")], fields[("branch-tangent", "-")]

    def proj(raw):
        return lambda t: project_to_normal_plane(metric, traj(t), raw(t))

    return LineFields(traj, proj(rp), proj(rm), rp, rm, cands)


# --------------------------------------------------------------------------
# Orientability
# --------------------------------------------------------------------------


def classify_holonomy(v_start, v_end, ambiguous=0.9):
    """True (orientable) if v_end points along v_start, False if reversed."""
    v0 = np.asarray(v_start, float)
    v1 = np.asarray(v_end, float)
    cos = float(v0 @ v1 / (np.linalg.norm(v0) * np.linalg.norm(v1)))
    if abs(cos) < ambiguous:
        raise AmbiguousHolonomyError(f"holonomy is ambiguous (cos = {cos:.3f})")
    return cos > 0


def transport_line_field(metric, traj, v0, t_end, tol=1e-11):
    """Transport v0 by the linearised flow along a pinned circle trajectory."""

    def rhs(t, v):
        return hamilton_jacobian(metric, traj(t)) @ v

    sol = solve_ivp(rhs, (traj.t0, t_end), np.asarray(v0, float), method="DOP853", rtol=tol, atol=tol * 1e-3)
    if sol.status != 0:
        raise IntegrationError(sol.message)
    return sol.y[:, -1]


def orientability(metric, circle: SaddleCircle, line_field: Optional[Callable] = None) -> bool:
    """Whether Y+ returns to itself (True) or to its negative after one turn.

    By default Y+ is transported by the linearised flow. A ``line_field``
    callable ``t -> vector`` may be supplied instead; its values at 0 and at
    the period are compared directly (used to test the detector).
    """
    if not circle.hyperbolic:
        raise NotHyperbolicError(f"{circle.label} is not a saddle circle")
    traj = circle_trajectory(metric, circle, periods=1)
    T = traj.period
    if line_field is not None:
        return classify_holonomy(line_field(0.0), line_field(T))
    red = CircleReduction(metric, circle)
    Y = _branch_tangent(red, 1)
    v_end = transport_line_field(metric, traj, Y(0.0), T)
    return classify_holonomy(Y(T), v_end)


# --------------------------------------------------------------------------
# Closed-form solutions along torus circles
# --------------------------------------------------------------------------


@dataclass
class Segment:
    """One piece of a fundamental solution in a chart parameter s.

    ``travel`` is +1 when s increases along the flow. ``u_plus``/``u_minus``
    and their s-derivatives ``du_plus``/``du_minus`` are evaluators in s;
    ``ell_of``/``s_of`` convert between s and arc length measured from the
    segment start.
    """

    name: str
    domain: tuple
    travel: int
    c: float
    u_plus: Callable
    u_minus: Callable
    du_plus: Callable
    du_minus: Callable
    ell_of: Callable
    s_of: Callable
    length: float
    sqrtF: Callable
    base: float = 0.0

    def in_arc_length(self, ell, which="+"):
        """(u, du/dl) at arc length ``ell`` from the segment start."""
        s = self.s_of(ell)
        if which == "+":
            u, du = self.u_plus(s), self.du_plus(s)
        else:
            u, du = self.u_minus(s), self.du_minus(s)
        return u, du * self.travel / self.sqrtF(s)

    def scalar_solutions(self):
        plus = ScalarSolution(
            lambda l: self.in_arc_length(l, "+")[0], lambda l: self.in_arc_length(l, "+")[1], "arc-length", (0.0, self.length)
        )
        minus = ScalarSolution(
            lambda l: self.in_arc_length(l, "-")[0], lambda l: self.in_arc_length(l, "-")[1], "arc-length", (0.0, self.length)
        )
        return plus, minus


@dataclass
class FundamentalSolution:
    """Pair (u+, u-) on one or more segments, with sphere gluing data."""

    segments: list
    exponents: list
    gluing: list = field(default_factory=list)
    info: dict = field(default_factory=dict)

    def to_json(self, samples=33):
        segs = []
        for seg in self.segments:
            lo, hi = seg.domain
            if seg.name.startswith("torus"):
                grid = np.linspace(lo, hi, samples)
            else:
                grid = lo + (hi - lo) * (0.5 - 0.5 * np.cos(np.linspace(0, math.pi, samples + 2)[1:-1]))
            segs.append(
                {
                    "name": seg.name,
                    "domain": [lo, hi],
                    "travel": seg.travel,
                    "tag": "chart",
                    "c": seg.c,
                    "arc_length": seg.length,
                    "param": [float(s) for s in grid],
                    "u_plus": [float(seg.u_plus(s)) for s in grid],
                    "u_minus": [float(seg.u_minus(s)) for s in grid],
                }
            )
        return {"segments": segs, "exponents": self.exponents, "gluing": self.gluing, "info": self.info}

    def dumps(self, samples=33):
        return json.dumps(self.to_json(samples), indent=2, sort_keys=True, default=_json_default)


def _json_default(o):
    if isinstance(o, (np.floating, np.integer)):
        return o.item()
    if isinstance(o, np.ndarray):
        return o.tolist()
    if isinstance(o, complex):
        return [o.real, o.imag]
    raise TypeError(type(o))


class _PeriodicR:
    """R(s) = int_{s0}^{s} du / sqrt(F(u)) for periodic F, for all real s."""

    def __init__(self, red, s0=0.0):
        self._prim = PeriodicPrimitive(lambda s: 1.0 / red.sqrtF(s), red.period)
        self.Lam = self._prim.period_integral
        self._off = float(self._prim(s0))

    def __call__(self, s):
        return float(self._prim(s)) - self._off


def fundamental_solution_torus(metric, circle: SaddleCircle, s0=0.0) -> FundamentalSolution:
    """u+-(s) = sqrt(F(s)) exp(+-c int_{s0}^{s} du / sqrt(F(u))).

    ``s`` is the chart coordinate along the circle (x for YCritical, y for
    XCritical); F is the metric restricted to the circle after moving the
    constant h(y0) (resp. f(x0)) into it. Arc length is dl = sqrt(F) ds.

    Raises
    ------
    NotHyperbolicError
        If the transverse second derivative is not positive.
    """
    red = CircleReduction(metric, circle)
    if not red.c2 > 0:
        raise NotHyperbolicError(f"{circle.label}: transverse second derivative {2 * red.c2:.6g} <= 0")
    c = red.c
    R = _PeriodicR(red, s0)
    arc = PeriodicArcLength(red)
    ell0 = arc.ell(s0)
    travel = red.sign

    def up(s):
        return red.sqrtF(s) * math.exp(c * R(s))

    def um(s):
        return red.sqrtF(s) * math.exp(-c * R(s))

    def dsq(s):
        return red.dF(s) / (2.0 * red.sqrtF(s))

    def dup(s):
        return math.exp(c * R(s)) * (dsq(s) + c)

    def dum(s):
        return math.exp(-c * R(s)) * (dsq(s) - c)

    def ell_of(s):
        return travel * (arc.ell(s) - ell0)

    def s_of(ell):
        return arc.s_of(ell0 + travel * ell)

    seg = Segment(
        f"torus {circle.label}", (0.0, red.period), travel, c, up, um, dup, dum, ell_of, s_of, arc.T, red.sqrtF, s0
    )
    return FundamentalSolution(
        [seg],
        [c],
        info={"circle": circle.to_dict(), "Lambda": R.Lam, "period": arc.T, "wronskian_arc_length": -2.0 * c * travel},
    )


def closed_form_residual(metric, circle, sol: FundamentalSolution, ell_window=None, samples=40):
    """Relative residual of d^2u/dl^2 + K u = 0 for both closed forms."""
    seg = sol.segments[0]
    red = CircleReduction(metric, circle)
    T = seg.length if ell_window is None else ell_window

    def K_at(ell):
        p = red.point(seg.s_of(ell))
        return metric.gauss_curvature(p[0], p[1])

    out = []
    for which in "+-":
        out.append(jacobi_hill_residual(lambda l: seg.in_arc_length(l, which)[0], K_at, 0.0, T, samples))
    return max(out)
