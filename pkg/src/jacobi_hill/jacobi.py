"""Jacobi fields in the invariant frame and scalar Jacobi-Hill solutions.

An invariant field along a flow trajectory is written
``n D_2 + n_dot D_phi + horiz D_1 + a A``; invariance is the linear system

    n' = n_dot,   n_dot' = -r^2 K n,   a' = 0,   horiz' = a.

Its projection to the surface is ``n * dpi(D_2) + horiz * gamma'``, which on
the unit-speed level is ``n * nu + horiz * gamma'`` with ``nu`` the positive
unit normal.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Callable, NamedTuple, Optional

import numpy as np
from scipy.integrate import IntegrationWarning, quad, solve_ivp
from scipy.optimize import brentq

from .errors import AlphaZeroError, IntegrationError, TagMismatchError, ToleranceError
from .flow import (
    Trajectory,
    fmt17,
    frame_decompose,
    frame_vectors,
    hamiltonian,
    sgrad_integral,
    write_csv,
)

TAGS = ("flow-time", "chart", "arc-length")


class JacobiFrameState(NamedTuple):
    n: float
    n_dot: float
    horiz: float
    a: float


def r2k(traj: Trajectory, t):
    """r^2 K along the trajectory, with r^2 = 2H."""
    x, y, px, py = traj(t)
    return 2.0 * hamiltonian(traj.metric, (x, y, px, py)) * traj.metric.gauss_curvature(x, y)


class JacobiEvolution:
    """A Jacobi field along ``traj`` given by its frame coefficients.

    ``state(t)`` returns ``(n, n_dot, horiz, a)``; ``residual`` is filled by
    constructions that certify system (n' = n_dot, ...) numerically.
    """

    def __init__(self, traj, fn, t_span, residual=None, source="ode"):
        self.traj = traj
        self._fn = fn
        self.t_span = (float(t_span[0]), float(t_span[1]))
        self.residual = residual
        self.source = source

    def state(self, t) -> np.ndarray:
        return np.asarray(self._fn(t))

    def n(self, t):
        return self.state(t)[0]

    def n_dot(self, t):
        return self.state(t)[1]

    def rows(self, times):
        out = []
        for t in times:
            n, nd, hz, a = self.state(t)
            K = self.traj.metric.gauss_curvature(*self.traj(t)[:2])
            res = system_residual(self, t)
            out.append([t, n, nd, hz, a, K, res])
        return out

    def to_csv(self, path, times):
        """Columns t, n, n_dot, horiz, a, K, residual."""
        write_csv(path, ["t", "n", "n_dot", "horiz", "a", "K", "residual"], self.rows(times))


def _clip_step(evo, t, h):
    lo, hi = sorted(evo.t_span)
    return min(h, (t - lo) / 2 if t > lo else h, (hi - t) / 2 if t < hi else h)


def system_residual(evo: JacobiEvolution, t, h=1e-4):
    """Max residual of the invariance system at ``t`` by five-point central differences."""
    h = _clip_step(evo, t, 2 * h) / 2
    if h <= 0:
        return 0.0
    # fourth-order five-point first derivative
    st = evo.state
    ds = (st(t - 2 * h) - 8 * st(t - h) + 8 * st(t + h) - st(t + 2 * h)) / (12 * h)
    n, nd, hz, a = evo.state(t)
    q = r2k(evo.traj, t)
    res = np.array([ds[0] - nd, ds[1] + q * n, ds[2] - a, ds[3]])
    scale = max(1.0, float(np.max(np.abs([n, nd, hz, a]))))
    return float(np.max(np.abs(res)) / scale)


def integrate_jacobi_frame(traj: Trajectory, init, t_end=None, t_start=None, tol=1e-11) -> JacobiEvolution:
    """Integrate the invariance system along ``traj`` from ``t_start``.

    ``r^2 K`` is read from the trajectory's dense output, so pinned circle
    trajectories and ordinary ones are handled alike.
    """
    t_start = traj.t0 if t_start is None else float(t_start)
    t_end = traj.t1 if t_end is None else float(t_end)
    init = np.asarray(init, dtype=float)

    def rhs(t, s):
        return [s[1], -r2k(traj, t) * s[0], s[3], 0.0]

    if t_end == t_start:
        return JacobiEvolution(traj, lambda t: init.copy(), (t_start, t_end))
    sol = solve_ivp(rhs, (t_start, t_end), init, method="DOP853", rtol=tol, atol=tol * 1e-3, dense_output=True)
    if sol.status != 0:
        raise IntegrationError(f"Jacobi integration failed: {sol.message}")
    return JacobiEvolution(traj, sol.sol, (t_start, t_end))


def integrate_normal_equation(traj: Trajectory, n0, n_dot0, t_end, t_start=None, tol=1e-11):
    """Direct integration of the scalar equation n'' + K n = 0 (unit speed)."""
    t_start = traj.t0 if t_start is None else t_start
    metric = traj.metric

    def rhs(t, s):
        x, y = traj(t)[:2]
        return [s[1], -metric.gauss_curvature(x, y) * s[0]]

    sol = solve_ivp(rhs, (t_start, t_end), [n0, n_dot0], method="DOP853", rtol=tol, atol=tol * 1e-3, dense_output=True)
    if sol.status != 0:
        raise IntegrationError(sol.message)
    return sol.sol


def project_jacobi(evo: JacobiEvolution, t):
    """Surface vector J(t) = n dpi(D_2) + horiz dpi(D_1) in chart components."""
    n, _, horiz, _ = evo.state(t)
    p = evo.traj(t)
    _, d1, d2, _ = frame_vectors(evo.traj.metric, p)
    return n * d2[:2] + horiz * d1[:2]


def metric_norm(metric, x, y, v):
    return math.sqrt(metric.lam(x, y) * (v[0] ** 2 + v[1] ** 2))


def jacobi_from_integral(metric, traj: Trajectory, times=None, tol=1e-6) -> JacobiEvolution:
    """Frame coefficients of sgrad F along ``traj`` as a Jacobi field.

    sgrad F commutes with the flow, so its coefficients must satisfy the
    invariance system; the residual is checked at ``times`` (default: 50
    interior samples) and :class:`ToleranceError` raised above ``tol``.
    """

    def fn(t):
        t_arr = np.atleast_1d(t)
        out = np.empty((4, t_arr.size))
        for i, ti in enumerate(t_arr):
            p = traj(ti)
            c = frame_decompose(metric, p, sgrad_integral(metric, p))
            out[:, i] = (c.c_2, c.c_phi, c.c_1, c.c_A)
        return out[:, 0] if np.ndim(t) == 0 else out

    evo = JacobiEvolution(traj, fn, traj.t_span, source="sgrad F")
    if times is None:
        lo, hi = sorted(traj.t_span)
        times = np.linspace(lo, hi, 52)[1:-1]
    evo.residual = max(system_residual(evo, t) for t in times)
    if evo.residual > tol:
        raise ToleranceError(f"sgrad F frame coefficients violate the invariance system ({evo.residual:.3g})")
    return evo


# --------------------------------------------------------------------------
# Invariant line fields
# --------------------------------------------------------------------------


@dataclass
class LineFieldAB:
    """Frame coordinates (alpha on D_2, beta on D_phi) of a line field."""

    alpha: Callable
    beta: Callable
    traj: Optional[Trajectory] = None
    pair: Optional[Callable] = None

    def ratio(self, t):
        if self.pair is not None:
            a, b = self.pair(t)
            return b / a
        return self.beta(t) / self.alpha(t)


def alpha_beta(metric, p, Y):
    """alpha = lam (x' k2 - y' k1) / r^2,
    beta = (lam_x k2 - lam_y k1) / (2 lam) + (x' K2 - y' K1) / r^2."""
    x, y, px, py = p
    lp = metric.lambda_partials(x, y, 1)
    lam = lp.lam
    xd, yd = px / lam, py / lam
    r2 = (px**2 + py**2) / lam
    k1, k2, K1, K2 = Y
    alpha = lam * (xd * k2 - yd * k1) / r2
    beta = (lp.lx * k2 - lp.ly * k1) / (2 * lam) + (xd * K2 - yd * K1) / r2
    return alpha, beta


def alpha_beta_from_Y(metric, traj: Trajectory, Y: Callable) -> LineFieldAB:
    """``Y(t)`` is the coordinate 4-vector (k1, k2, K1, K2) of the field."""

    def pair(t):
        return alpha_beta(metric, traj(t), Y(t))

    return LineFieldAB(alpha=lambda t: pair(t)[0], beta=lambda t: pair(t)[1], traj=traj, pair=pair)


def project_to_normal_plane(metric, p, Y):
    """Projection of Y along <A, D_1> onto <D_2, D_phi>."""
    c = frame_decompose(metric, p, Y)
    d_phi, _, d2, _ = frame_vectors(metric, p)
    return c.c_2 * d2 + c.c_phi * d_phi


@dataclass
class ScalarSolution:
    """A solution u of a Jacobi-Hill equation with its first derivative.

    ``tag`` names the parameter: "flow-time", "chart" or "arc-length".
    """

    u: Callable
    du: Callable
    tag: str
    domain: tuple = (-math.inf, math.inf)
    info: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.tag not in TAGS:
            raise ValueError(f"unknown parameterisation tag {self.tag!r}")

    def __call__(self, t):
        return self.u(t)


def wronskian(u1: ScalarSolution, u2: ScalarSolution, t):
    """W = u1 u2' - u1' u2."""
    if u1.tag != u2.tag:
        raise TagMismatchError(f"{u1.tag} vs {u2.tag}")
    return u1.u(t) * u2.du(t) - u1.du(t) * u2.u(t)


class CumulativeIntegral:
    """s -> integral of ``g`` from ``a`` to s, via adaptive quadrature on nodes."""

    def __init__(self, g, a, b, nodes=64, tol=1e-12):
        self.g = g
        self.tol = tol
        self.nodes = np.linspace(a, b, nodes + 1)
        vals = [0.0]
        for lo, hi in zip(self.nodes[:-1], self.nodes[1:]):
            vals.append(vals[-1] + self._quad(lo, hi))
        self.values = np.array(vals)

    def _quad(self, lo, hi):
        if lo == hi:
            return 0.0
        # tolerances near machine precision trip quad's roundoff detector
        # although the returned value is accurate; keep its estimate instead
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", IntegrationWarning)
            v, err = quad(self.g, lo, hi, epsabs=self.tol, epsrel=self.tol, limit=200)
        self.max_error = max(getattr(self, "max_error", 0.0), err)
        return v

    def __call__(self, s):
        if np.ndim(s):
            return np.array([self(si) for si in np.asarray(s)])
        nodes = self.nodes
        step = nodes[1] - nodes[0]
        key = (s - nodes[0]) / step if step != 0 else 0.0
        i = int(min(max(round(key), 0), len(nodes) - 1))
        return self.values[i] + self._quad(nodes[i], s)


def find_sign_changes(fn, a, b, n=2000):
    ts = np.linspace(a, b, n + 1)
    vals = np.array([fn(t) for t in ts])
    out = []
    for i in range(n):
        if vals[i] == 0.0:
            out.append(ts[i])
        elif vals[i] * vals[i + 1] < 0:
            out.append(brentq(fn, ts[i], ts[i + 1], xtol=1e-13))
    if vals[-1] == 0.0:
        out.append(ts[-1])
    return out


def _fd2(u, t, h):
    """Fourth-order five-point second difference."""
    return (-u(t + 2 * h) + 16 * u(t + h) - 30 * u(t) + 16 * u(t - h) - u(t - 2 * h)) / (12 * h * h)


def jacobi_hill_residual(u: Callable, q: Callable, a, b, samples=40, h=1e-4):
    """max |u'' + q u| / max |u| over interior samples, with u'' by differences."""
    ts = np.linspace(a, b, samples + 2)[1:-1]
    h = min(h, 0.2 * abs(ts[0] - a)) if samples else h
    uvals = np.array([u(t) for t in ts])
    res = np.array([_fd2(u, t, h) + q(t) * ut for t, ut in zip(ts, uvals)])
    return float(np.max(np.abs(res)) / max(np.max(np.abs(uvals)), 1e-300))


def solution_from_line_field(ab: LineFieldAB, t0, t1, check=True, tol=1e-6, scan=2000):
    """u(t) = exp(int_{t0}^t beta/alpha) and the invariant scale kappa.

    Returns ``(u, kappa)`` where ``u`` is a flow-time :class:`ScalarSolution`
    and ``kappa(t) = alpha(t0) / alpha(t) * u(t)``.

    Raises
    ------
    AlphaZeroError
        If alpha changes sign (or vanishes) on [t0, t1].
    ToleranceError
        If the Jacobi-Hill residual exceeds ``tol * max|u|``.
    """
    zeros = find_sign_changes(ab.alpha, t0, t1, scan)
    if zeros:
        raise AlphaZeroError(zeros[0])
    integral = CumulativeIntegral(ab.ratio, t0, t1)

    def u(t):
        return math.exp(integral(t))

    def du(t):
        return u(t) * ab.ratio(t)

    a0 = ab.alpha(t0)
    sol = ScalarSolution(u, du, "flow-time", (t0, t1))

    def kappa(t):
        return a0 / ab.alpha(t) * u(t)

    if check and ab.traj is not None:
        res = jacobi_hill_residual(u, lambda t: r2k(ab.traj, t), min(t0, t1), max(t0, t1))
        sol.info["residual"] = res
        if res > tol:
            raise ToleranceError(f"line-field solution residual {res:.3g} exceeds {tol:.1g}")
    return sol, kappa


# --------------------------------------------------------------------------
# Reparameterisation
# --------------------------------------------------------------------------


@dataclass
class ReparamSolution:
    """u as a function of a curve parameter tau, with the tau <-> t link."""

    u_tau: ScalarSolution
    t_of_tau: Callable
    tau_range: tuple

    def tau_of_t(self, t):
        lo, hi = self.tau_range
        return brentq(lambda tau: self.t_of_tau(tau) - t, lo, hi, xtol=1e-14)

    def in_flow_time(self) -> ScalarSolution:
        def u(t):
            return self.u_tau.u(self.tau_of_t(t))

        def du(t):
            tau = self.tau_of_t(t)
            return self.u_tau.du(tau) / self._dt_dtau(tau)

        lo, hi = self.tau_range
        return ScalarSolution(u, du, "flow-time", (self.t_of_tau(lo), self.t_of_tau(hi)))

    def _dt_dtau(self, tau, h=1e-6):
        return (self.t_of_tau(tau + h) - self.t_of_tau(tau - h)) / (2 * h)


def reparam_solution(metric, curve: Callable, Y: Callable, tau0, tau1, r=1.0, tag="chart") -> ReparamSolution:
    """Jacobi-Hill solution along a geodesic with an arbitrary regular parameter.

    ``curve(tau)`` returns ``(x, y, dx/dtau, dy/dtau)``; ``Y(tau)`` returns the
    field coordinates (k1, k2, K1, K2). With speed ``v = sqrt(lam) |dgamma/dtau|``:

        alpha = lam (x_tau k2 - y_tau k1) / (r^2 v)
        beta  = (lam_x k2 - lam_y k1) / (2 lam) + (x_tau K2 - y_tau K1) / (r^2 v)
        u(tau) = exp int (beta / alpha) v dtau,   dt = v dtau / r.
    """

    def pieces(tau):
        x, y, xt, yt = curve(tau)
        lp = metric.lambda_partials(x, y, 1)
        lam = lp.lam
        v = math.sqrt(lam) * math.hypot(xt, yt)
        if v == 0:
            raise ValueError(f"irregular curve at tau = {tau}")
        k1, k2, K1, K2 = Y(tau)
        alpha = lam * (xt * k2 - yt * k1) / (r**2 * v)
        beta = (lp.lx * k2 - lp.ly * k1) / (2 * lam) + (xt * K2 - yt * K1) / (r**2 * v)
        return alpha, beta, v

    def integrand(tau):
        alpha, beta, v = pieces(tau)
        return beta / alpha * v

    zeros = find_sign_changes(lambda s: pieces(s)[0], tau0, tau1, 500)
    if zeros:
        raise AlphaZeroError(zeros[0])
    logu = CumulativeIntegral(integrand, tau0, tau1)
    t_of = CumulativeIntegral(lambda s: pieces(s)[2] / r, tau0, tau1)

    def u(tau):
        return math.exp(logu(tau))

    def du(tau):
        return u(tau) * integrand(tau)

    return ReparamSolution(ScalarSolution(u, du, tag, (tau0, tau1)), t_of, (tau0, tau1))
