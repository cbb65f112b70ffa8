"""Geodesic flow on T*P for lambda(dx^2+dy^2), its integral and canonical frame.

Phase coordinates are ``(x, y, p_x, p_y)``; tangent vectors to T*P are
4-vectors ``(dx, dy, dp_x, dp_y)``. Lie brackets follow [V, W] = DW.V - DV.W.
The unit-speed level is H = 1/2.
"""

from __future__ import annotations

import csv
import math
from typing import Callable, NamedTuple

import numpy as np
from scipy.integrate import solve_ivp

from .errors import (
    BranchPointError,
    DomainError,
    IntegrationError,
    ToleranceError,
    ZeroMomentumError,
)

DEFAULT_TOL = 1e-10
DEFAULT_TOL_CONS = 1e-8


class PhasePoint(NamedTuple):
    x: float
    y: float
    px: float
    py: float


class FrameCoords(NamedTuple):
    """Coefficients in the basis (D_phi, D_1, D_2, A)."""

    c_phi: float
    c_1: float
    c_2: float
    c_A: float


def hamiltonian(metric, p):
    x, y, px, py = p
    return (px**2 + py**2) / (2.0 * metric.lam(x, y))


def quadratic_integral(metric, p):
    x, y, px, py = p
    return metric.quadratic_integral(x, y, px, py)


def has_integral(metric) -> bool:
    return hasattr(metric, "quadratic_integral")


def hamilton_rhs(metric, p):
    """sgrad H = (H_px, H_py, -H_x, -H_y)."""
    x, y, px, py = p
    lp = metric.lambda_partials(x, y, 1)
    lam = lp.lam
    s = px**2 + py**2
    c = s / (2.0 * lam**2)
    return np.array([px / lam, py / lam, c * lp.lx, c * lp.ly])


def hamilton_jacobian(metric, p):
    """Exact Jacobian of :func:`hamilton_rhs` (rows: components, cols: x, y, px, py)."""
    x, y, px, py = p
    lp = metric.lambda_partials(x, y, 2)
    lam, lx, ly = lp.lam, lp.lx, lp.ly
    s = px**2 + py**2
    l2, l3 = lam**2, lam**3
    J = np.empty((4, 4))
    J[0] = [-px * lx / l2, -px * ly / l2, 1.0 / lam, 0.0]
    J[1] = [-py * lx / l2, -py * ly / l2, 0.0, 1.0 / lam]
    J[2] = [
        0.5 * s * (lp.lxx / l2 - 2 * lx * lx / l3),
        0.5 * s * (lp.lxy / l2 - 2 * lx * ly / l3),
        px * lx / l2,
        py * lx / l2,
    ]
    J[3] = [
        0.5 * s * (lp.lxy / l2 - 2 * lx * ly / l3),
        0.5 * s * (lp.lyy / l2 - 2 * ly * ly / l3),
        px * ly / l2,
        py * ly / l2,
    ]
    return J


def sgrad_integral(metric, p):
    """sgrad F for a separable metric's quadratic integral."""
    Fx, Fy, Fpx, Fpy = metric.quadratic_integral_gradient(*p)
    return np.array([Fpx, Fpy, -Fx, -Fy])


# --------------------------------------------------------------------------
# Canonical frame
# --------------------------------------------------------------------------


def frame_vectors(metric, p):
    """(D_phi, D_1, D_2, A) at a phase point with nonzero momentum.

    D_2 is the commutator [D_phi, D_1] evaluated in closed form from the
    first partials of lambda.
    """
    x, y, px, py = p
    if px == 0 and py == 0:
        raise ZeroMomentumError("frame undefined at zero momentum")
    lp = metric.lambda_partials(x, y, 1)
    lam = lp.lam
    s = px**2 + py**2
    c = s / (2.0 * lam**2)
    d_phi = np.array([0.0, 0.0, -py, px])
    d1 = np.array([px / lam, py / lam, c * lp.lx, c * lp.ly])
    d2 = np.array([-py / lam, px / lam, c * lp.ly, -c * lp.lx])
    a = np.array([0.0, 0.0, px, py])
    return d_phi, d1, d2, a


def frame_matrix(metric, p):
    """4x4 matrix whose columns are D_phi, D_1, D_2, A."""
    return np.column_stack(frame_vectors(metric, p))


def frame_decompose(metric, p, v) -> FrameCoords:
    M = frame_matrix(metric, p)
    try:
        c = np.linalg.solve(M, np.asarray(v, dtype=float))
    except np.linalg.LinAlgError as exc:
        raise ZeroMomentumError("singular frame") from exc
    return FrameCoords(*c)


def frame_compose(metric, p, coords):
    return frame_matrix(metric, p) @ np.asarray(coords, dtype=float)


def field_d_phi(metric):
    return lambda p: frame_vectors(metric, p)[0]


def field_d1(metric):
    return lambda p: frame_vectors(metric, p)[1]


def field_d2(metric):
    return lambda p: frame_vectors(metric, p)[2]


def field_a(metric):
    return lambda p: frame_vectors(metric, p)[3]


def lie_bracket_fd(V: Callable, W: Callable, p, eps=1e-5):
    """Central-difference [V, W] = DW.V - DV.W at ``p``."""
    p = np.asarray(p, dtype=float)
    v = np.asarray(V(p))
    w = np.asarray(W(p))
    dw_v = (np.asarray(W(p + eps * v)) - np.asarray(W(p - eps * v))) / (2 * eps)
    dv_w = (np.asarray(V(p + eps * w)) - np.asarray(V(p - eps * w))) / (2 * eps)
    return dw_v - dv_w


def frame_relations(metric):
    """The six commutation relations as (name, lhs fields, expected field).

    Each item is ``(name, V, W, expected)`` where ``expected(p)`` is the
    predicted value of [V, W](p).
    """
    d_phi, d1, d2, a = field_d_phi(metric), field_d1(metric), field_d2(metric), field_a(metric)

    def r2k_dphi(p):
        r2 = 2.0 * hamiltonian(metric, p)
        return r2 * metric.gauss_curvature(p[0], p[1]) * d_phi(p)

    return [
        ("[D1,D2] = r^2 K Dphi", d1, d2, r2k_dphi),
        ("[Dphi,D1] = D2", d_phi, d1, d2),
        ("[Dphi,D2] = -D1", d_phi, d2, lambda p: -d1(p)),
        ("[A,D1] = D1", a, d1, d1),
        ("[A,D2] = D2", a, d2, d2),
        ("[A,Dphi] = 0", a, d_phi, lambda p: np.zeros(4)),
    ]


# --------------------------------------------------------------------------
# Trajectories
# --------------------------------------------------------------------------


class Trajectory:
    """Dense solution of the geodesic flow.

    Call with a time (or array of times) to get the phase state(s). ``H0``
    and ``F0`` are the conserved values at the initial time; ``F0`` is None
    for metrics without a quadratic integral.
    """

    def __init__(self, metric, dense, t_span, ts, states, tol, label="geodesic"):
        self.metric = metric
        self._dense = dense
        self.t_span = (float(t_span[0]), float(t_span[1]))
        self.ts = np.asarray(ts)
        self.states = np.asarray(states)
        self.tol = tol
        self.label = label
        p0 = self.states[:, 0]
        self.H0 = hamiltonian(metric, p0)
        self.F0 = quadratic_integral(metric, p0) if has_integral(metric) else None

    @property
    def t0(self):
        return self.t_span[0]

    @property
    def t1(self):
        return self.t_span[1]

    def __call__(self, t):
        lo, hi = sorted(self.t_span)
        tt = np.asarray(t, dtype=float)
        span = hi - lo
        if np.any(tt < lo - 1e-9 * max(1.0, span)) or np.any(tt > hi + 1e-9 * max(1.0, span)):
            raise ValueError(f"t outside trajectory span {self.t_span}")
        return self._dense(t)

    def point(self, t) -> PhasePoint:
        return PhasePoint(*[float(v) for v in self(t)])

    def velocity(self, t):
        x, y, px, py = self(t)
        lam = self.metric.lam(x, y)
        return np.array([px / lam, py / lam])

    def conservation_errors(self, states=None):
        """Max relative drift of H and F over the solver's step points."""
        states = self.states if states is None else states
        H = np.array([hamiltonian(self.metric, s) for s in states.T])
        dH = float(np.max(np.abs(H - self.H0)) / abs(self.H0))
        dF = None
        if self.F0 is not None:
            F = np.array([quadratic_integral(self.metric, s) for s in states.T])
            dF = float(np.max(np.abs(F - self.F0)) / (1.0 + abs(self.F0)))
        return dH, dF

    def rows(self, times=None):
        times = self.ts if times is None else np.asarray(times)
        out = []
        for t in times:
            s = self(t)
            H = hamiltonian(self.metric, s)
            F = quadratic_integral(self.metric, s) if self.F0 is not None else float("nan")
            out.append([float(t), *map(float, s), H, F])
        return out

    def to_csv(self, path, times=None):
        """Columns t, x, y, p_x, p_y, H, F; 17 significant digits, LF endings."""
        write_csv(path, ["t", "x", "y", "p_x", "p_y", "H", "F"], self.rows(times))


def fmt17(v):
    return format(float(v), ".17g")


def write_csv(path, header, rows):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([fmt17(v) for v in row])


def _solve(rhs, t_span, y0, tol, what):
    try:
        sol = solve_ivp(
            rhs, t_span, y0, method="DOP853", rtol=tol, atol=tol * 1e-2, dense_output=True
        )
    except (BranchPointError, DomainError) as exc:
        raise IntegrationError(f"{what}: step-size underflow near a singular point ({exc})") from exc
    if sol.status != 0:
        raise IntegrationError(f"{what}: {sol.message}")
    return sol


def integrate_geodesic(metric, p0, t_span, tol=DEFAULT_TOL, tol_cons=None, check=True) -> Trajectory:
    """Integrate Hamilton's equations for H = |p|^2 / (2 lambda).

    DOP853 (an embedded 8(5,3) Runge-Kutta pair) with dense output. H and,
    if available, F are monitored at every accepted step; drift beyond
    ``tol_cons`` (default 100 * tol) raises :class:`ToleranceError`.
    """
    p0 = np.asarray(p0, dtype=float)
    if not hamiltonian(metric, p0) > 0:
        raise ValueError("initial energy must be positive")
    if tol_cons is None:
        tol_cons = 100.0 * tol
    sol = _solve(lambda t, s: hamilton_rhs(metric, s), t_span, p0, tol, "geodesic")
    traj = Trajectory(metric, sol.sol, t_span, sol.t, sol.y, tol)
    if check:
        dH, dF = traj.conservation_errors()
        if dH > tol_cons or (dF is not None and dF > tol_cons):
            raise ToleranceError(f"conservation drift dH={dH:.3g}, dF={dF} exceeds {tol_cons:.3g}")
    return traj


def unit_speed_point(metric, x, y, angle) -> PhasePoint:
    s = math.sqrt(metric.lam(x, y))
    return PhasePoint(x, y, s * math.cos(angle), s * math.sin(angle))


def numeric_poisson_bracket(metric, F: Callable, G: Callable, p, eps=1e-6):
    """{F, G} = F_x G_px + F_y G_py - F_px G_x - F_py G_y by central differences."""
    p = np.asarray(p, dtype=float)

    def grad(fun):
        g = np.empty(4)
        for i in range(4):
            e = np.zeros(4)
            e[i] = eps
            g[i] = (fun(p + e) - fun(p - e)) / (2 * eps)
        return g

    gf, gg = grad(F), grad(G)
    return gf[0] * gg[2] + gf[1] * gg[3] - gf[2] * gg[0] - gf[3] * gg[1]


def variational_flow(metric, traj: Trajectory, v0, t_end, tol=1e-11):
    """Transport a tangent vector with the linearised flow dS_t along ``traj``.

    Used as an independent route to invariant vector fields.
    """
    t0 = traj.t0

    def rhs(t, v):
        return hamilton_jacobian(metric, traj(t)) @ v

    sol = _solve(rhs, (t0, t_end), np.asarray(v0, float), tol, "variational")
    return sol.sol
