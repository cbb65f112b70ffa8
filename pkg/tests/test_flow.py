import math

import numpy as np
import pytest

from jacobi_hill.errors import IntegrationError, ToleranceError, ZeroMomentumError
from jacobi_hill.flow import (
    frame_compose,
    frame_decompose,
    frame_matrix,
    frame_vectors,
    hamilton_jacobian,
    hamilton_rhs,
    hamiltonian,
    integrate_geodesic,
    frame_relations,
    lie_bracket_fd,
    numeric_poisson_bracket,
    quadratic_integral,
    unit_speed_point,
)
from jacobi_hill.verify import frame_commutator_error, random_phase_points


def test_hamiltonian_values(flat, torus):
    assert hamiltonian(flat, (0.0, 0.0, 1.0, 0.0)) == 0.5
    assert hamiltonian(torus, (0.0, 0.0, math.sqrt(3.0), 0.0)) == pytest.approx(0.5)
    assert hamiltonian(torus, (0.3, 0.1, 0.0, 0.0)) == 0.0


def test_integral_vanishes_on_circle(torus):
    x = 0.37
    assert quadratic_integral(torus, (x, 0.0, math.sqrt(torus.f(x)), 0.0)) == 0.0


def test_poisson_bracket_vanishes(torus, rng):
    H = lambda p: hamiltonian(torus, p)
    F = lambda p: quadratic_integral(torus, p)
    pts = random_phase_points(torus, 100, rng, unit=False)
    assert max(abs(numeric_poisson_bracket(torus, H, F, p)) for p in pts) < 1e-6


def test_F_conserved_long_runs(torus, rng):
    for p0 in random_phase_points(torus, 20, rng):
        traj = integrate_geodesic(torus, p0, (0.0, 50.0))
        dH, dF = traj.conservation_errors()
        assert dH < 1e-8 and dF < 1e-8


def test_flat_straight_line(flat):
    traj = integrate_geodesic(flat, (0.0, 0.0, 1.0, 0.0), (0.0, 2.0))
    np.testing.assert_allclose(traj(2.0), [2.0, 0.0, 1.0, 0.0], atol=1e-12)


def test_torus_energy_long(torus):
    x, y = 0.5, 0.3
    p0 = unit_speed_point(torus, x, y, 0.4)
    traj = integrate_geodesic(torus, p0, (0.0, 100.0))
    H = [hamiltonian(torus, s) for s in traj.states.T]
    assert max(abs(h - 0.5) for h in H) < 1e-8


def test_round_sphere_great_circle_returns(round_sphere):
    from jacobi_hill.conjugacy import great_circle_start

    p0 = great_circle_start()
    traj = integrate_geodesic(round_sphere, p0, (0.0, 2 * math.pi + 0.1))
    np.testing.assert_allclose(traj(2 * math.pi), p0, atol=1e-5)


def test_round_sphere_origin_start_leaves_chart(round_sphere):
    # a great circle through the origin is a chart line through infinity
    p0 = unit_speed_point(round_sphere, 0.0, 0.0, 0.3)
    with pytest.raises(IntegrationError):
        integrate_geodesic(round_sphere, p0, (0.0, 2 * math.pi + 0.1))


def test_semigroup_property(torus):
    p0 = unit_speed_point(torus, 0.1, 0.2, 1.1)
    tol = 1e-10
    traj = integrate_geodesic(torus, p0, (0.0, 5.0), tol=tol)
    mid = traj(2.0)
    again = integrate_geodesic(torus, mid, (0.0, 3.0), tol=tol)
    assert np.max(np.abs(again(3.0) - traj(5.0))) < 10 * tol * 100


def test_trajectory_span_checked(torus):
    traj = integrate_geodesic(torus, unit_speed_point(torus, 0.1, 0.2, 1.1), (0.0, 1.0))
    with pytest.raises(ValueError):
        traj(1.5)


def test_conservation_monitor_raises(torus):
    with pytest.raises(ToleranceError):
        integrate_geodesic(torus, unit_speed_point(torus, 0.1, 0.2, 1.1), (0.0, 50.0), tol=1e-4, tol_cons=1e-12)


def test_sphere_branch_point_hit_is_reported(sphere_sin2):
    # heading straight at the branch point (0, 0) along y = 0
    p0 = (0.25, 0.0, -math.sqrt(sphere_sin2.lam(0.25, 0.0)), 0.0)
    with pytest.raises((IntegrationError, ToleranceError)):
        integrate_geodesic(sphere_sin2, p0, (0.0, 2.0))


def test_hamilton_jacobian_matches_fd(torus, rng):
    for p in random_phase_points(torus, 10, rng, unit=False):
        J = hamilton_jacobian(torus, p)
        fd = np.empty((4, 4))
        for j in range(4):
            e = np.zeros(4)
            e[j] = 1e-6
            fd[:, j] = (hamilton_rhs(torus, p + e) - hamilton_rhs(torus, p - e)) / 2e-6
        np.testing.assert_allclose(J, fd, atol=1e-6 * max(1, np.max(np.abs(J))))


def test_flat_frame():
    from jacobi_hill.metrics import flat_chart

    d_phi, d1, d2, a = frame_vectors(flat_chart(), (0.2, 0.3, 1.0, 0.0))
    np.testing.assert_array_equal(d_phi, [0, 0, 0, 1])
    np.testing.assert_array_equal(a, [0, 0, 1, 0])
    np.testing.assert_array_equal(d1, [1, 0, 0, 0])
    np.testing.assert_array_equal(d2, [0, 1, 0, 0])


def test_frame_nondegenerate(torus, rng):
    for p in random_phase_points(torus, 100, rng, unit=False):
        M = frame_matrix(torus, p)
        assert abs(np.linalg.det(M)) > 1e-8
        np.testing.assert_array_equal(M[:2, 0], [0, 0])
        np.testing.assert_array_equal(M[:2, 3], [0, 0])


def test_zero_momentum(torus):
    with pytest.raises(ZeroMomentumError):
        frame_vectors(torus, (0.1, 0.1, 0.0, 0.0))


def test_decompose_roundtrip(torus, rng):
    p = random_phase_points(torus, 1, rng)[0]
    _, _, d2, _ = frame_vectors(torus, p)
    np.testing.assert_allclose(frame_decompose(torus, p, d2), [0, 0, 1, 0], atol=1e-14)
    for q in random_phase_points(torus, 50, rng, unit=False):
        v = rng.normal(size=4)
        back = frame_compose(torus, q, frame_decompose(torus, q, v))
        assert np.linalg.norm(back - v) < 1e-10 * np.linalg.norm(v)
    flat_p = (0.0, 0.0, 1.0, 0.0)
    from jacobi_hill.metrics import flat_chart

    c = frame_decompose(flat_chart(), flat_p, (0.0, 1.0, 0.0, 0.0))
    assert c.c_2 == pytest.approx(1.0)


@pytest.mark.parametrize("which", ["flat", "round_sphere", "torus"])
def test_frame_commutators(which, request, rng):
    metric = request.getfixturevalue(which)
    pts = random_phase_points(metric, 30, rng, unit=False)
    assert frame_commutator_error(metric, pts) < 1e-4


def test_individual_brackets(torus, rng):
    pts = random_phase_points(torus, 20, rng, unit=False)
    rel = dict((name, (V, W, E)) for name, V, W, E in frame_relations(torus))
    V, W, E = rel["[Dphi,D1] = D2"]
    for p in pts:
        lhs, rhs = lie_bracket_fd(V, W, p), E(p)
        assert np.linalg.norm(lhs - rhs) < 1e-5 * max(1.0, np.linalg.norm(rhs))
    V, W, _ = rel["[A,Dphi] = 0"]
    for p in pts:
        assert np.max(np.abs(lie_bracket_fd(V, W, p))) < 1e-6


def test_csv_export(torus, tmp_path):
    traj = integrate_geodesic(torus, unit_speed_point(torus, 0.1, 0.2, 1.1), (0.0, 1.0))
    path = tmp_path / "t.csv"
    traj.to_csv(path, np.linspace(0, 1, 5))
    raw = path.read_bytes()
    assert b"\r" not in raw
    lines = raw.decode().splitlines()
    assert lines[0] == "t,x,y,p_x,p_y,H,F"
    assert len(lines) == 6
    row = [float(v) for v in lines[3].split(",")]
    np.testing.assert_array_equal(row[1:5], traj(row[0]))
