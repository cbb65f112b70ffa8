"""Closed-form Jacobi solutions along the saddle circles of the example torus.

Run with ``python3 demos/torus_saddle.py``.
"""

import numpy as np

from jacobi_hill import example_torus
from jacobi_hill.saddle import (
    closed_form_multipliers,
    closed_form_residual,
    floquet_multipliers,
    fundamental_solution_torus,
    hyperbolic_circles,
)


def main():
    torus = example_torus()
    for c in hyperbolic_circles(torus):
        fs = fundamental_solution_torus(torus, c)
        fl = floquet_multipliers(torus, c)
        mu = sorted(abs(float(np.real(m))) for m in fl.multipliers)
        cf = sorted(closed_form_multipliers(torus, c))
        print(f"{c.label:<18s} Floquet {mu[1]:.10f} {mu[0]:.10f}   closed form {cf[1]:.10f} {cf[0]:.10f}")
        print(f"{'':<18s} W = {fs.info['wronskian_arc_length']:.12f}   residual {closed_form_residual(torus, c, fs):.2e}")


if __name__ == "__main__":
    main()
