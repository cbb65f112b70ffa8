"""Conformal metrics lambda(x, y)(dx^2 + dy^2) and their Gaussian curvature.

Three families are provided:

* :class:`LiouvilleTorusMetric` -- lambda = f(x) + h(y) on S_1 x S_L with
  nonconstant periodic f, h and f + h > 0.
* :class:`KolokoltsovSphereMetric` -- the same form with f, h vanishing at
  the four fixed points of the involution (x, y) -> (-x, -y); the sphere is
  represented in this torus double-cover chart throughout.
* :class:`ConformalChartMetric` -- an arbitrary two-variable lambda on a
  rectangle (flat chart, stereographic round-sphere chart, ...).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import NamedTuple, Optional

import numpy as np

from .errors import BranchPointError, MetricValidationError
from .expr import DiffExpr, parse

BRANCH_THRESHOLD = 1e-8


class LambdaPartials(NamedTuple):
    lam: float
    lx: Optional[float] = None
    ly: Optional[float] = None
    lxx: Optional[float] = None
    lxy: Optional[float] = None
    lyy: Optional[float] = None


def _as_expr(e, variables=("x", "y")):
    if isinstance(e, DiffExpr):
        return e
    return parse(str(e), variables)


class ConformalMetric:
    """Interface shared by all metric families."""

    def lambda_partials(self, x, y, order=2) -> LambdaPartials:
        raise NotImplementedError

    def lam(self, x, y):
        return self.lambda_partials(x, y, 0).lam

    def gauss_curvature(self, x, y):
        """K = -[(ln lam)_xx + (ln lam)_yy] / (2 lam)."""
        p = self.lambda_partials(x, y, 2)
        lam = p.lam
        lap_log = (p.lxx * lam - p.lx**2 + p.lyy * lam - p.ly**2) / lam**2
        return -lap_log / (2.0 * lam)


# --------------------------------------------------------------------------
# separable metrics f(x) + h(y)
# --------------------------------------------------------------------------


class SeparableMetric(ConformalMetric):
    """lambda = f(x) + h(y) with f of period 1 and h of period L (unvalidated)."""

    def __init__(self, f, h, L=1.0):
        self.f = _as_expr(f)
        self.h = _as_expr(h)
        self.L = float(L)
        if len(self.f.free) > 1 or len(self.h.free) > 1:
            raise ValueError("f and h must each depend on a single variable")
        self._f1 = self.f.derivative(1)
        self._f2 = self.f.derivative(2)
        self._h1 = self.h.derivative(1)
        self._h2 = self.h.derivative(2)

    def __repr__(self):
        return f"{type(self).__name__}(f={self.f.serialize()!r}, h={self.h.serialize()!r}, L={self.L!r})"

    @property
    def periods(self):
        return (1.0, self.L)

    def _check_point(self, x, y):
        pass

    def lambda_partials(self, x, y, order=2):
        self._check_point(x, y)
        lam = self.f(x) + self.h(y)
        if order == 0:
            return LambdaPartials(lam)
        lx = self._f1(x)
        ly = self._h1(y)
        if order == 1:
            return LambdaPartials(lam, lx, ly)
        if order > 2:
            raise ValueError("order must be <= 2")
        zero = 0.0 * lx if isinstance(lx, np.ndarray) else 0.0
        return LambdaPartials(lam, lx, ly, self._f2(x), zero, self._h2(y))

    def quadratic_integral(self, x, y, px, py):
        """F = (h p_x^2 - f p_y^2) / (f + h), equal to p_x^2 - 2 H f."""
        fv, hv = self.f(x), self.h(y)
        return (hv * px**2 - fv * py**2) / (fv + hv)

    def quadratic_integral_gradient(self, x, y, px, py):
        """(F_x, F_y, F_px, F_py)."""
        self._check_point(x, y)
        fv, hv = self.f(x), self.h(y)
        lam = fv + hv
        num = hv * px**2 - fv * py**2
        fx, hy = self._f1(x), self._h1(y)
        Fx = -fx * py**2 / lam - num * fx / lam**2
        Fy = hy * px**2 / lam - num * hy / lam**2
        Fpx = 2.0 * hv * px / lam
        Fpy = -2.0 * fv * py / lam
        return Fx, Fy, Fpx, Fpy


def _grid(period, n):
    return np.arange(n) * (period / n)


class LiouvilleTorusMetric(SeparableMetric):
    """(f(x) + h(y))(dx^2 + dy^2) on S_1 x S_L.

    Construction checks periodicity on a 64-point grid, nonconstancy on a
    256-point grid and positivity of min f + min h (only the sum matters),
    raising :class:`MetricValidationError`
    naming the failed invariant.
    """

    def __init__(self, f, h, L=1.0):
        super().__init__(f, h, L)
        if not self.L > 0:
            raise MetricValidationError("L positive", f"L = {L}")
        for name, fn, period in (("f", self.f, 1.0), ("h", self.h, self.L)):
            g = _grid(period, 64)
            gap = np.max(np.abs(fn(g + period) - fn(g)))
            if not gap < 1e-10:
                raise MetricValidationError(
                    f"{name} periodic", f"|{name}(s+{period:g}) - {name}(s)| reaches {gap:.3g}"
                )
            vals = fn(_grid(period, 256))
            if np.ptp(vals) < 1e-12:
                raise MetricValidationError(f"{name} nonconstant", f"{name} is constant on the grid")
        # a constant may be moved between f and h without changing lambda, so
        # positivity is required of the pair: min f + min h > 0
        low = float(np.min(self.f(_grid(1.0, 256))) + np.min(self.h(_grid(self.L, 256))))
        if not low > 0:
            raise MetricValidationError("f + h positive", f"min f + min h = {low:.6g} on grid")


class KolokoltsovSphereMetric(SeparableMetric):
    """Sphere metric in its torus double-cover chart.

    Build instances with :func:`validate_kolokoltsov`; the constructor does
    not repeat the checks.
    """

    def __init__(self, f, h, L=1.0, smoothness_order=0):
        super().__init__(f, h, L)
        self.smoothness_order = int(smoothness_order)
        self.branch_points = branch_points(self.L)

    def _check_point(self, x, y):
        if isinstance(x, np.ndarray) or isinstance(y, np.ndarray):
            d = branch_distance(np.asarray(x, float), np.asarray(y, float), self.L)
            if np.any(d < BRANCH_THRESHOLD):
                raise BranchPointError("evaluation within 1e-8 of a branch point")
            return
        if branch_distance(x, y, self.L) < BRANCH_THRESHOLD:
            raise BranchPointError(f"({x:.3g}, {y:.3g}) is within 1e-8 of a branch point")


def branch_points(L=1.0):
    """Fixed points of (x, y) -> (-x, -y) on S_1 x S_L."""
    return ((0.0, 0.0), (0.0, L / 2), (0.5, 0.0), (0.5, L / 2))


def involution_image(x, y, L=1.0):
    """sigma(x, y) = (-x, -y) reduced to [0, 1) x [0, L)."""
    return ((-x) % 1.0, (-y) % L)


def _circ(d, period):
    d = np.mod(d, period)
    return np.minimum(d, period - d)


def branch_distance(x, y, L=1.0):
    """Distance in the torus chart to the nearest branch point.

    The branch points form the half-period lattice, so the distance reduces
    to the residues of x mod 1/2 and y mod L/2.
    """
    if isinstance(x, float) and isinstance(y, float):
        dx = math.fmod(x, 0.5) % 0.5
        dy = math.fmod(y, 0.5 * L) % (0.5 * L)
        return math.hypot(min(dx, 0.5 - dx), min(dy, 0.5 * L - dy))
    return np.hypot(_circ(x, 0.5), _circ(y, 0.5 * L))


@dataclass(frozen=True)
class RejectionReport:
    """Outcome of a failed :func:`validate_kolokoltsov` call."""

    condition: str
    message: str
    details: dict = field(default_factory=dict)

    def __bool__(self):
        return False


def _close(a, b, rel=1e-8):
    return abs(a - b) <= rel * max(1.0, abs(a), abs(b))


def validate_kolokoltsov(f, h, L=1.0, k=0, grid=1024, zero_tol=1e-12):
    """Check the sphere conditions and the C^k branch-point condition.

    Returns a :class:`KolokoltsovSphereMetric` or a :class:`RejectionReport`
    naming the first violated condition ("periodicity", "condition 1",
    "condition 2", "condition 3" or "smoothness").
    """
    f = _as_expr(f)
    h = _as_expr(h)
    L = float(L)
    lifts = {"f": (f, 1.0), "h": (h, L)}

    for name, (fn, period) in lifts.items():
        g = _grid(period, 64)
        gap = float(np.max(np.abs(fn(g + period) - fn(g))))
        if not gap < 1e-10:
            return RejectionReport("periodicity", f"{name} is not {period:g}-periodic (gap {gap:.3g})")

    # condition 1: nonnegative, zeros exactly at {0, period/2}
    for name, (fn, period) in lifts.items():
        g = _grid(period, grid)
        vals = fn(g)
        zeros = (0, grid // 2)
        if np.min(vals) < -zero_tol:
            return RejectionReport("condition 1", f"{name} takes negative values (min {np.min(vals):.3g})")
        for idx in zeros:
            if abs(vals[idx]) > zero_tol:
                return RejectionReport(
                    "condition 1", f"{name}({g[idx]:g}) = {vals[idx]:.6g} is not zero", {"point": g[idx]}
                )
        extra = [i for i in np.nonzero(vals <= zero_tol)[0] if i not in zeros]
        if extra:
            return RejectionReport(
                "condition 1", f"{name} vanishes at {g[extra[0]]:g} besides 0 and {period / 2:g}"
            )
        d2 = fn.derivative(2)
        for idx in zeros:
            if not d2(g[idx]) > 0:
                return RejectionReport("condition 1", f"{name}'' is not positive at the zero {g[idx]:g}")

    # condition 2: equal nonzero second derivatives at the four zeros
    second = {
        "f''(0)": f.derivative(2)(0.0),
        "f''(1/2)": f.derivative(2)(0.5),
        "h''(0)": h.derivative(2)(0.0),
        "h''(L/2)": h.derivative(2)(L / 2),
    }
    ref = second["f''(0)"]
    if ref == 0:
        return RejectionReport("condition 2", "f''(0) = 0", second)
    for key, val in second.items():
        if not _close(val, ref, 1e-9):
            return RejectionReport("condition 2", f"{key} = {val:.10g} differs from f''(0) = {ref:.10g}", second)

    # condition 3: evenness
    for name, (fn, period) in lifts.items():
        g = _grid(period, grid)
        gap = float(np.max(np.abs(fn(g) - fn(-g))))
        if not gap < 1e-10:
            return RejectionReport("condition 3", f"{name}(s) != {name}(-s) (gap {gap:.3g})")

    # C^k matching of Taylor coefficients at each branch point
    for bx, by in branch_points(L):
        for m in range(1, k + 3):
            fm = f.derivative(m)(bx)
            hm = h.derivative(m)(by)
            if not _close(fm, (-1) ** m * hm):
                return RejectionReport(
                    "smoothness",
                    f"order {m} at ({bx:g}, {by:g}): f^({m}) = {fm:.10g}, (-1)^{m} h^({m}) = {(-1) ** m * hm:.10g}",
                    {"order": m, "branch_point": (bx, by)},
                )
    return KolokoltsovSphereMetric(f, h, L, smoothness_order=k)


# --------------------------------------------------------------------------
# general conformal charts
# --------------------------------------------------------------------------


class ConformalChartMetric(ConformalMetric):
    """lambda(x, y)(dx^2 + dy^2) on ``domain = (xmin, xmax, ymin, ymax)``."""

    def __init__(self, lam, domain=(-1.0, 1.0, -1.0, 1.0), check=True):
        self.lambda_expr = _as_expr(lam)
        self.domain = tuple(float(v) for v in domain)
        e = self.lambda_expr
        self._dx = e.derivative(1, "x")
        self._dy = e.derivative(1, "y")
        self._dxx = self._dx.derivative(1, "x")
        self._dxy = self._dx.derivative(1, "y")
        self._dyy = self._dy.derivative(1, "y")
        if check:
            x0, x1, y0, y1 = self.domain
            gx, gy = np.meshgrid(np.linspace(x0, x1, 33), np.linspace(y0, y1, 33))
            vals = e.eval(x=gx, y=gy)
            if np.min(vals) <= 0:
                raise MetricValidationError("lambda positive", f"min lambda = {np.min(vals):.3g} on the domain")

    def __repr__(self):
        return f"ConformalChartMetric({self.lambda_expr.serialize()!r}, domain={self.domain})"

    def lambda_partials(self, x, y, order=2):
        e = self.lambda_expr
        lam = e.eval(x=x, y=y)
        if order == 0:
            return LambdaPartials(lam)
        lx, ly = self._dx.eval(x=x, y=y), self._dy.eval(x=x, y=y)
        if order == 1:
            return LambdaPartials(lam, lx, ly)
        return LambdaPartials(
            lam, lx, ly, self._dxx.eval(x=x, y=y), self._dxy.eval(x=x, y=y), self._dyy.eval(x=x, y=y)
        )


def flat_chart(domain=(-10.0, 10.0, -10.0, 10.0)):
    return ConformalChartMetric("1", domain)


def round_sphere_chart(domain=(-3.0, 3.0, -3.0, 3.0)):
    """Inverse stereographic chart of the unit sphere, K = 1."""
    return ConformalChartMetric("4/(1 + x^2 + y^2)^2", domain)


def lambda_partials(metric: ConformalMetric, x, y, order=2) -> LambdaPartials:
    return metric.lambda_partials(x, y, order)


def gauss_curvature(metric: ConformalMetric, x, y):
    return metric.gauss_curvature(x, y)


def metric_from_config(spec: dict):
    """Build a metric from the ``metric`` block of a scenario config."""
    kind = spec["kind"]
    if kind == "liouville-torus":
        return LiouvilleTorusMetric(spec["f"], spec["h"], spec.get("L", 1.0))
    if kind == "kolokoltsov-sphere":
        out = validate_kolokoltsov(spec["f"], spec["h"], spec.get("L", 1.0), spec.get("smoothness_k", 0))
        if isinstance(out, RejectionReport):
            raise MetricValidationError(out.condition, out.message)
        return out
    if kind == "conformal-chart":
        domain = spec.get("domain", (-3.0, 3.0, -3.0, 3.0))
        return ConformalChartMetric(spec["lambda"], domain)
    raise ValueError(f"unknown metric kind {kind!r}")


EXAMPLE_TORUS = ("2 + cos(2*pi*x)", "1 - cos(2*pi*y)", 1.0)


def example_torus():
    """f = 2 + cos 2 pi x, h = 1 - cos 2 pi y, L = 1."""
    return LiouvilleTorusMetric(*EXAMPLE_TORUS)


def unit_speed_momentum(metric, x, y, angle):
    """Covector with H = 1/2 pointing at ``angle`` (radians) in the chart."""
    s = math.sqrt(metric.lam(x, y))
    return s * math.cos(angle), s * math.sin(angle)
