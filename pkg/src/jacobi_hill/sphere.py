"""Closed-form Jacobi-Hill solutions along the nonsimple circle of a sphere metric.

In the torus double-cover chart the circle is the boundary of the rectangle
[0, 1/2] x [0, L/2], traversed

    I_f+ : y = 0,    x from 0 to 1/2
    I_h+ : x = 1/2,  y from 0 to L/2
    I_f- : y = L/2,  x from 1/2 to 0
    I_h- : x = 0,    y from L/2 to 0

with junctions at the four branch points. The chart is conformal and the
involution preserves orientation, so the unit normal obtained by rotating
the velocity by +90 degrees in the chart is continuous through every branch
point on the sphere; normal Jacobi components therefore glue with continuous
value and arc-length derivative.

On each segment, with F the metric along it and c the transverse exponent,

    u+-(s) = sqrt(F(s)) exp(+- c R(s)),   R(s) = travel * int_{s0}^{s} du / sqrt(F(u)),

so u+ grows along the flow on every segment and every segment has arc-length
Wronskian -2c. Near a branch point u+ stays finite at the end of a segment
and vanishes at its start, while u- does the opposite.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import quad, solve_ivp
from scipy.optimize import brentq

from .errors import GluingError, IntegrationError, NotHyperbolicError, ToleranceError
from .jacobi import CumulativeIntegral
from .metrics import KolokoltsovSphereMetric
from .saddle import FundamentalSolution, Segment, classify_monodromy

DELTAS = (1e-2, 5e-3, 2.5e-3)
ORACLE_GAP = 5e-3
GLUE_TOL = 1e-6


def _richardson_even(values, ratio=2.0):
    """Two-level Richardson extrapolation for an expansion in even powers."""
    a, b, c = values
    r2 = ratio**2
    ab = (r2 * b - a) / (r2 - 1)
    bc = (r2 * c - b) / (r2 - 1)
    r4 = ratio**4
    return (r4 * bc - ab) / (r4 - 1)


class SphereSegment:
    """One straight piece of the nonsimple circle in the chart."""

    def __init__(self, metric, name, along, fixed, start, end):
        self.metric = metric
        self.name = name
        self.along = along  # "x" or "y"
        self.fixed = float(fixed)
        self.start = float(start)
        self.end = float(end)
        self.travel = 1 if end > start else -1
        if along == "x":
            fexpr, cross = metric.f, metric.h
        else:
            fexpr, cross = metric.h, metric.f
        self._F = fexpr
        self.shift = float(cross(fixed))
        self._d = [fexpr.derivative(k) for k in range(5)]
        c2 = float(cross.derivative(2)(fixed)) / 2.0
        if not c2 > 0:
            raise NotHyperbolicError(f"{name}: transverse second derivative {2 * c2:.6g} <= 0")
        self.c = math.sqrt(c2)
        self.s0 = 0.5 * (start + end)
        lo, hi = sorted((start, end))
        pad = 1e-3 * (hi - lo)
        self._R = CumulativeIntegral(lambda s: 1.0 / self.sqrtF(s), self.s0, hi - pad, nodes=32, tol=1e-14)
        self._Rlo = CumulativeIntegral(lambda s: 1.0 / self.sqrtF(s), self.s0, lo + pad, nodes=32, tol=1e-14)
        self.length = self.arc_between(start, end)

    # -- along-segment functions ------------------------------------------
    def F(self, s):
        return self._F(s) + self.shift

    def sqrtF(self, s):
        return math.sqrt(max(self.F(s), 0.0))

    def dsqrtF(self, s):
        return self._d[1](s) / (2.0 * self.sqrtF(s))

    def point(self, s):
        p = self.travel * self.sqrtF(s)
        if self.along == "x":
            return (s, self.fixed, p, 0.0)
        return (self.fixed, s, 0.0, p)

    def R(self, s):
        """travel * int_{s0}^{s} du / sqrt(F)."""
        raw = self._R(s) if s >= self.s0 else self._Rlo(s)
        return self.travel * raw

    def u(self, s, which):
        sgn = 1 if which == "+" else -1
        return self.sqrtF(s) * math.exp(sgn * self.c * self.R(s))

    def du_ds(self, s, which):
        sgn = 1 if which == "+" else -1
        return math.exp(sgn * self.c * self.R(s)) * (self.dsqrtF(s) + sgn * self.travel * self.c)

    def du_dell(self, s, which):
        return self.du_ds(s, which) * self.travel / self.sqrtF(s)

    def arc_between(self, s1, s2):
        v, _ = quad(self.sqrtF, min(s1, s2), max(s1, s2), epsabs=1e-14, epsrel=1e-13, limit=200)
        return v

    def ell_of(self, s):
        return self.arc_between(self.start, s)

    def s_of(self, ell):
        if ell <= 0:
            return self.start
        if ell >= self.length:
            return self.end
        return brentq(lambda s: self.ell_of(s) - ell, self.start, self.end, xtol=1e-15)

    def curvature(self, s):
        p = self.point(s)
        return self.metric.gauss_curvature(p[0], p[1])

    # -- limits at the two branch-point ends ---------------------------------
    def endpoint(self, where):
        return self.end if where == "end" else self.start

    def series_limits(self, where):
        """Route A: limits of (u, du/dl) for both branches from the local series.

        With t the chart distance to the branch point, sqrt(F) = a t (1 +
        rho2 t^2 + ...), a = sqrt(F''/2), rho2 = F''''/(24 F''). Splitting
        int du/sqrt(F) into (1/a) log t plus a convergent remainder G gives
        finite value a t0 exp(cG) and slope 3 rho2 t0 exp(cG) for the finite
        branch, and slope (2/t0) exp(-cG) for the vanishing branch, in the
        arc-length distance d to the branch point.
        """
        e = self.endpoint(where)
        F2 = float(self._d[2](e))
        F4 = float(self._d[4](e))
        a = math.sqrt(F2 / 2.0)
        ratio = self.c / a
        if abs(ratio - 1.0) > 1e-9:
            raise GluingError(f"{self.name}: exponent ratio c/a = {ratio:.12g} != 1 at {where}", ratio)
        rho2 = F4 / (24.0 * F2)
        t0 = abs(e - self.s0)
        toward = 1.0 if e > self.s0 else -1.0

        def remainder(tau):
            if tau == 0.0:
                return 0.0
            return 1.0 / self.sqrtF(e - toward * tau) - 1.0 / (a * tau)

        G, _ = quad(remainder, 0.0, t0, epsabs=1e-14, epsrel=1e-13, limit=200)
        finite_value = a * t0 * math.exp(self.c * G)
        finite_slope_d = 3.0 * rho2 * t0 * math.exp(self.c * G)
        vanish_slope_d = (2.0 / t0) * math.exp(-self.c * G)
        # arc-length direction: d decreases along travel at the end, grows at the start
        dd = -1.0 if where == "end" else 1.0
        finite = "+" if where == "end" else "-"
        out = {}
        for which in "+-":
            if which == finite:
                out[which] = (finite_value, dd * finite_slope_d)
            else:
                out[which] = (0.0, dd * vanish_slope_d)
        out["finite"] = finite
        out["G"] = G
        out["rho2"] = rho2
        out["a"] = a
        return out

    def cut_limits(self, where, deltas=DELTAS):
        """Route B: closed forms at chart distance delta, Richardson-extrapolated."""
        e = self.endpoint(where)
        inward = -1.0 if where == "end" else 1.0
        inward *= self.travel
        out = {}
        for which in "+-":
            vals, slopes = [], []
            for d in deltas:
                s = e + inward * d
                vals.append(self.u(s, which))
                slopes.append(self.du_dell(s, which))
            out[which] = (_richardson_even(vals), _richardson_even(slopes))
        return out


def gamma1_segments(metric: KolokoltsovSphereMetric):
    L = metric.L
    return [
        SphereSegment(metric, "I_f+", "x", 0.0, 0.0, 0.5),
        SphereSegment(metric, "I_h+", "y", 0.5, 0.0, L / 2),
        SphereSegment(metric, "I_f-", "x", L / 2, 0.5, 0.0),
        SphereSegment(metric, "I_h-", "y", 0.0, L / 2, 0.0),
    ]


JUNCTIONS = ("B1 = (1/2, 0)", "A2 = (1/2, L/2)", "B2 = (0, L/2)", "A1 = (0, 0)")


def _wmatrix(lim):
    return np.array([[lim["+"][0], lim["-"][0]], [lim["+"][1], lim["-"][1]]])


@dataclass
class Junction:
    name: str
    continuation: np.ndarray  # prev coefficients -> next coefficients
    constants: dict
    route_gap: float
    c1_mismatch: float


def _junction(prev: SphereSegment, nxt: SphereSegment, name):
    pa, na = prev.series_limits("end"), nxt.series_limits("start")
    pb, nb = prev.cut_limits("end"), nxt.cut_limits("start")
    Wp, Wn = _wmatrix(pa), _wmatrix(na)
    T = np.linalg.solve(Wn, Wp)
    # Next basis written in the prev basis, n = C p. The vanishing branch
    # (u- at the end of prev, u+ at the start of next) continues to a
    # negative multiple of the next vanishing branch, since the field changes
    # sign through its zero; the reported gluing quotients are the magnitudes.
    C = np.linalg.inv(T).T
    consts = {
        "C11": float(abs(C[0, 1])),  # |vanishing -> vanishing|, slope quotient
        "C22": float(C[1, 0]),  # finite -> finite, value quotient
        "C12": float(C[0, 0]),  # vanishing next in terms of finite prev: always 0
        "C21": float(C[1, 1]),  # finite next in terms of vanishing prev
        "vanishing_sign": float(np.sign(C[0, 1])),
        "det_continuation": float(np.linalg.det(T)),
        "continuation": T.tolist(),
    }
    consts["C11*C22"] = consts["C11"] * consts["C22"]
    scale = max(1.0, float(np.max(np.abs(Wp))))
    gap = max(
        float(np.max(np.abs(_wmatrix(pa) - _wmatrix(pb)))),
        float(np.max(np.abs(_wmatrix(na) - _wmatrix(nb)))),
    ) / scale
    mismatch = float(np.max(np.abs(_wmatrix(nb) @ T - _wmatrix(pb)))) / scale
    return Junction(name, T, consts, gap, mismatch)


# --------------------------------------------------------------------------
# Independent oracle: (n, dn/dl) integrated in the chart parameter
# --------------------------------------------------------------------------


def _oracle_segment(seg: SphereSegment, s_from, s_to, state, rtol=1e-11):
    """Integrate dn/ds = (dl/ds) m, dm/ds = -(dl/ds) K n between interior points."""

    def rhs(s, v):
        w = seg.travel * seg.sqrtF(s)
        return [w * v[1], -w * seg.curvature(s) * v[0]]

    if s_from == s_to:
        return np.asarray(state, float)
    sol = solve_ivp(rhs, (s_from, s_to), state, method="DOP853", rtol=rtol, atol=1e-13)
    if sol.status != 0:
        raise IntegrationError(sol.message)
    return sol.y[:, -1]


def _bridge(seg, s_inner, end, state):
    """Free motion over the tiny arc between an interior point and a branch point."""
    dl = seg.arc_between(s_inner, end)
    n, m = state
    K = seg.curvature(s_inner)
    return np.array([n + m * dl - 0.5 * K * n * dl**2, m - K * n * dl])


def oracle_propagate(segs, k, s_from, state, k_to, s_to, gap=ORACLE_GAP, full_turn=False):
    """Carry (n, m) along the circle from (segment k, s_from) to (segment k_to, s_to).

    Passes through junctions, wrapping around the loop. With ``full_turn``
    and equal endpoints the whole circle is traversed once.
    """
    state = np.asarray(state, float)
    seg = segs[k]
    d = (s_to - s_from) * seg.travel
    ahead = d > 0 or (d == 0 and not full_turn)
    if k == k_to and ahead:
        return _oracle_segment(seg, s_from, s_to, state)
    near_end = seg.end - seg.travel * gap
    state = _oracle_segment(seg, s_from, near_end, state)
    state = _bridge(seg, near_end, seg.end, state)
    n_seg = len(segs)
    j = (k + 1) % n_seg
    while True:
        seg = segs[j]
        near_start = seg.start + seg.travel * gap
        state = _bridge(seg, near_start, seg.start, state)
        if j == k_to:
            return _oracle_segment(seg, near_start, s_to, state)
        near_end = seg.end - seg.travel * gap
        state = _oracle_segment(seg, near_start, near_end, state)
        state = _bridge(seg, near_end, seg.end, state)
        j = (j + 1) % n_seg


def oracle_monodromy(metric, segs=None, s_base=0.25, gap=ORACLE_GAP):
    """Monodromy of (n, dn/dl) once around the circle from (x = s_base, y = 0).

    The bridges over the excluded arcs are second order in arc length,
    leaving an O(gap^4) error; two gaps are combined by Richardson
    extrapolation.
    """
    segs = segs or gamma1_segments(metric)

    def once(g):
        cols = [
            oracle_propagate(segs, 0, s_base, e, 0, s_base, gap=g, full_turn=True)
            for e in ([1.0, 0.0], [0.0, 1.0])
        ]
        return np.column_stack(cols)

    coarse, fine = once(gap), once(0.5 * gap)
    return (16.0 * fine - coarse) / 15.0


# --------------------------------------------------------------------------
# Glued fundamental solution
# --------------------------------------------------------------------------


@dataclass
class SphereReport:
    """Hyperbolicity data for the nonsimple circle."""

    kind: str
    trace: float
    multipliers: list
    period: float
    oracle_trace: float
    closed_form_monodromy: np.ndarray = field(repr=False, default=None)
    oracle_monodromy: np.ndarray = field(repr=False, default=None)

    @property
    def hyperbolic(self):
        return self.kind == "hyperbolic"

    def to_dict(self):
        return {
            "kind": self.kind,
            "trace": self.trace,
            "oracle_trace": self.oracle_trace,
            "multipliers": [[complex(m).real, complex(m).imag] for m in self.multipliers],
            "period": self.period,
        }


class GluedSolution:
    """Coefficient bookkeeping for solutions glued along the circle."""

    def __init__(self, segs, junctions):
        self.segs = segs
        self.junctions = junctions
        self.offsets = np.concatenate([[0.0], np.cumsum([s.length for s in segs])])
        self.period = float(self.offsets[-1])

    def coefficients(self, a0, k0=0, turns=1):
        """Per-segment coefficient vectors starting from ``a0`` on segment k0."""
        out = []
        a = np.asarray(a0, float)
        n = len(self.segs)
        for i in range(n * turns + 1):
            k = (k0 + i) % n
            out.append((k, a.copy()))
            a = self.junctions[k].continuation @ a
        return out

    def evaluate(self, k, a, s):
        seg = self.segs[k]
        u = a[0] * seg.u(s, "+") + a[1] * seg.u(s, "-")
        du = a[0] * seg.du_dell(s, "+") + a[1] * seg.du_dell(s, "-")
        return u, du

    def monodromy(self):
        M = np.eye(2)
        for j in self.junctions:
            M = j.continuation @ M
        return M


def gamma1_report(metric, segs=None, junctions=None) -> SphereReport:
    """Certify the type of the nonsimple circle from the oracle monodromy."""
    segs = segs or gamma1_segments(metric)
    Mo = oracle_monodromy(metric, segs)
    Mc = None
    tr = float(np.trace(Mo))
    if junctions is not None:
        Mc = GluedSolution(segs, junctions).monodromy()
    trace = float(np.trace(Mc)) if Mc is not None else tr
    # the monodromy is unimodular, so the multipliers follow from the trace
    # without the cancellation that eigvals suffers on the small root
    mu = np.roots([1.0, -trace, 1.0])
    if abs(trace) > 2.0:
        big = mu[np.argmax(np.abs(mu))].real
        mu = np.array([big, 1.0 / big])
    return SphereReport(
        classify_monodromy(Mo), trace, list(mu),
        float(sum(s.length for s in segs)), tr, Mc, Mo,
    )


def fundamental_solution_sphere(metric: KolokoltsovSphereMetric, require_hyperbolic=True, tol=GLUE_TOL):
    """Glued fundamental solution along the nonsimple circle.

    Returns ``(FundamentalSolution, SphereReport)``. Both limit routes (local
    series and Richardson-extrapolated cuts) are computed at every junction;
    their disagreement and the C^1 mismatch of the glued basis are stored in
    the gluing records and must be below ``tol``.

    Raises
    ------
    NotHyperbolicError
        If ``require_hyperbolic`` and the oracle monodromy is not hyperbolic;
        the exception carries the report as ``.report``.
    GluingError
        If an exponent ratio differs from 1.
    ToleranceError
        If the gluing certificate fails.
    """
    segs = gamma1_segments(metric)
    junctions = [_junction(segs[k], segs[(k + 1) % 4], JUNCTIONS[k]) for k in range(4)]
    report = gamma1_report(metric, segs, junctions)
    if require_hyperbolic and not report.hyperbolic:
        err = NotHyperbolicError(
            f"nonsimple circle is {report.kind} (monodromy trace {report.oracle_trace:.12g})"
        )
        err.report = report
        raise err
    worst = max(max(j.route_gap, j.c1_mismatch) for j in junctions)
    if worst > tol:
        raise ToleranceError(f"sphere gluing certificate {worst:.3g} exceeds {tol:.1g}")
    fs = FundamentalSolution(
        [
            Segment(
                s.name, (s.start, s.end), s.travel, s.c,
                (lambda s_, seg=s: seg.u(s_, "+")), (lambda s_, seg=s: seg.u(s_, "-")),
                (lambda s_, seg=s: seg.du_ds(s_, "+")), (lambda s_, seg=s: seg.du_ds(s_, "-")),
                s.ell_of, s.s_of, s.length, s.sqrtF, s.s0,
            )
            for s in segs
        ],
        [s.c for s in segs],
        gluing=[
            {"junction": j.name, **j.constants, "route_gap": j.route_gap, "c1_mismatch": j.c1_mismatch}
            for j in junctions
        ],
        info={"report": report.to_dict()},
    )
    fs.glued = GluedSolution(segs, junctions)
    fs.sphere_segments = segs
    return fs, report


# --------------------------------------------------------------------------
# Conjugate point along the nonsimple circle
# --------------------------------------------------------------------------


@dataclass
class SphereConjugate:
    x1: float
    found: bool
    segment: str = None
    coordinate: float = None
    x2: float = None
    arc_from_x1: float = None
    slope: float = None
    oracle_value: float = None
    equation: dict = field(default_factory=dict)
    report: dict = field(default_factory=dict)

    def to_dict(self):
        return {k: getattr(self, k) for k in (
            "x1", "found", "segment", "coordinate", "x2", "arc_from_x1", "slope", "oracle_value", "equation", "report")}


def _scan_zero(fn, lo, hi, n=400):
    """First sign change of fn on (lo, hi) in the direction lo -> hi."""
    ts = lo + (hi - lo) * (0.5 - 0.5 * np.cos(np.linspace(0.0, math.pi, n)))
    prev_t, prev_v = ts[0], fn(ts[0])
    for t in ts[1:]:
        v = fn(t)
        if prev_v == 0.0:
            return prev_t
        if prev_v * v < 0:
            return brentq(fn, prev_t, t, xtol=1e-12)
        prev_t, prev_v = t, v
    return None


def displayed_equation(metric, segs, x1, x2):
    """Both sides of the displayed conjugate-point equation, regularised.

    The left side and the numerator on the right are finite limits. The
    denominator tends to zero like the arc-length distance to the branch
    point, so the printed quotient diverges; its finite part is reported
    with the denominator replaced by its arc-length slope.
    """
    f_seg, h_seg = segs[0], segs[1]
    lim_h_start, lim_h_end = h_seg.series_limits("start"), h_seg.series_limits("end")
    a_h = lim_h_start["a"]
    t0 = abs(h_seg.end - h_seg.start) / 2.0
    c_f = h_seg.c
    lhs = a_h**2 * t0**2 * math.exp(c_f * (lim_h_start["G"] + lim_h_end["G"]))

    c_h = f_seg.c
    a0 = math.sqrt(float(metric.f.derivative(2)(0.0)) / 2.0)

    def G_at(e, start, toward):
        a = math.sqrt(float(metric.f.derivative(2)(e)) / 2.0)
        dist = abs(e - start)
        g = lambda tau: 0.0 if tau == 0 else 1.0 / f_seg.sqrtF(e - toward * tau) - 1.0 / (a * tau)
        return quad(g, 0.0, dist, epsabs=1e-14, epsrel=1e-13, limit=200)[0]

    num = a0 * (0.5 - x1) * math.exp(c_h * G_at(0.5, x1, 1.0))
    den_slope = (2.0 / x2) * math.exp(-c_h * G_at(0.0, x2, -1.0))
    rhs = num / den_slope
    return {
        "lhs": lhs,
        "rhs_numerator": num,
        "rhs_denominator_limit": 0.0,
        "rhs_denominator_arc_slope": den_slope,
        "printed_form_diverges": True,
        "regularised_rhs": rhs,
        "regularised_residual": abs(lhs - rhs) / max(abs(lhs), 1e-300),
    }


def solve_conjugate_sphere(metric, x1, require_hyperbolic=True, fs=None):
    """First conjugate point of x1 in I_f+ along the nonsimple circle.

    Root-finding runs on the glued closed-form solution vanishing at ``x1``
    (brentq to 1e-12 in the chart parameter) over one full turn. When the
    zero lies on I_f-, ``x2`` is its chart coordinate there and both sides
    of the displayed equation are evaluated. The zero is cross-checked by
    the chart-parameter oracle. Absence of a zero is reported, not raised.
    """
    if fs is None:
        fs, _ = fundamental_solution_sphere(metric, require_hyperbolic=require_hyperbolic)
    glued = fs.glued
    segs = fs.sphere_segments
    s1 = segs[0]
    if not 0.0 < x1 < 0.5:
        raise ValueError("x1 must lie in (0, 1/2)")
    a0 = np.array([s1.u(x1, "-"), -s1.u(x1, "+")])
    result = SphereConjugate(float(x1), False, report=fs.info.get("report", {}))
    pad = 1e-7
    pieces = glued.coefficients(a0, 0, turns=1)
    for i, (k, a) in enumerate(pieces):
        seg = segs[k]
        lo = x1 + seg.travel * 1e-9 if i == 0 else seg.start + seg.travel * pad
        hi = x1 if i == len(pieces) - 1 else seg.end - seg.travel * pad
        z = _scan_zero(lambda s, k=k, a=a: glued.evaluate(k, a, s)[0], lo, hi)
        if z is None:
            continue
        u, du = glued.evaluate(k, a, z)
        result.found = True
        result.segment = seg.name
        result.coordinate = float(z)
        result.slope = float(du)
        result.arc_from_x1 = _arc_from(segs, x1, k, z, i)
        if seg.name == "I_f-":
            result.x2 = float(z)
            result.equation = displayed_equation(metric, segs, x1, z)
        state = oracle_propagate(segs, 0, x1, [0.0, 1.0], k, z)
        result.oracle_value = float(state[0] / max(abs(state[1]), 1e-300))
        break
    return result


def _arc_from(segs, x1, k, s, piece):
    if piece == 0:
        return segs[0].arc_between(x1, s)
    total = segs[0].arc_between(x1, segs[0].end)
    j = 1
    while j != k:
        total += segs[j].length
        j = (j + 1) % len(segs)
    return total + segs[k].arc_between(segs[k].start, s)
