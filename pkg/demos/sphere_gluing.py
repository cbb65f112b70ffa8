"""Gluing constants and monodromy along the nonsimple circle of two sphere metrics.

Run with ``python3 demos/sphere_gluing.py``.
"""

import numpy as np

from jacobi_hill.metrics import validate_kolokoltsov
from jacobi_hill.sphere import fundamental_solution_sphere

METRICS = {
    "sin^2": ("sin(2*pi*x)^2", "sin(2*pi*y)^2"),
    "perturbed": ("sin(2*pi*x)^2 - 0.75*sin(2*pi*x)^4", "sin(2*pi*y)^2 - 0.75*sin(2*pi*y)^4"),
}


def main():
    np.set_printoptions(precision=6, suppress=True)
    for name, (f, h) in METRICS.items():
        metric = validate_kolokoltsov(f, h, 1.0, 4)
        fs, rep = fundamental_solution_sphere(metric, require_hyperbolic=False)
        print(f"{name}: {rep.kind}, trace {rep.trace:.8f} (oracle {rep.oracle_trace:.8f})")
        print(fs.glued.monodromy())
        for g in fs.gluing:
            print(f"  {g['junction']:<16s} C11 {g['C11']:.6f}  C22 {g['C22']:.6f}  C12 {g['C12']:+.1e}  "
                  f"C21 {g['C21']:.6f}  C1 mismatch {g['c1_mismatch']:.1e}")


if __name__ == "__main__":
    main()
