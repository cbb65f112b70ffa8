"""Conjugate points on the round sphere and the caustic cross-check on the torus.

Run with ``python3 demos/sphere_conjugacy.py``.
"""

import math

from jacobi_hill import example_torus, round_sphere_chart
from jacobi_hill.conjugacy import (
    caustic_conjugates,
    count_N,
    cross_validate_caustics,
    find_conjugate_points,
    great_circle_start,
    return_period,
    torus_regular_start,
)
from jacobi_hill.flow import integrate_geodesic


def main():
    sphere = round_sphere_chart()
    T, traj = return_period(sphere, great_circle_start(), 5 * math.pi)
    rep = find_conjugate_points(sphere, traj, 0.0, 2 * T - 0.1)
    print(f"great circle period {T:.12f}")
    print("conjugate times / pi:", ", ".join(f"{t / math.pi:.10f}" for t in rep.conjugate_times))
    print("N over one period:", count_N(sphere, traj, period=T).N)

    torus = example_torus()
    for F0 in (0.7, -1.6):
        traj = integrate_geodesic(torus, torus_regular_start(torus, F0), (0.0, 12.0), tol=1e-11)
        caustic = caustic_conjugates(torus, traj)
        gap = cross_validate_caustics(torus, traj, caustic)
        print(f"torus F = {F0:+.1f}: {len(caustic.brackets)} caustic pairs, max gap to Jacobi zeros {gap:.1e}")


if __name__ == "__main__":
    main()
