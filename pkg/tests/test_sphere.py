import json
import math

import numpy as np
import pytest

from jacobi_hill.errors import NotHyperbolicError
from jacobi_hill.sphere import (
    displayed_equation,
    fundamental_solution_sphere,
    gamma1_segments,
    oracle_monodromy,
    solve_conjugate_sphere,
)


def test_segments_form_rectangle(sphere_sin2):
    segs = gamma1_segments(sphere_sin2)
    assert [s.name for s in segs] == ["I_f+", "I_h+", "I_f-", "I_h-"]
    ends = [tuple(np.round(s.point(s.end)[:2], 12)) for s in segs]
    starts = [tuple(np.round(s.point(s.start)[:2], 12)) for s in segs]
    assert ends == starts[1:] + starts[:1]
    assert segs[1].fixed == 0.5


def test_sin2_gluing_constants(sphere_sin2_solution):
    fs, _ = sphere_sin2_solution
    for g in fs.gluing:
        assert g["C11"] == pytest.approx(1.0, abs=1e-10)
        assert g["C22"] == pytest.approx(1.0, abs=1e-10)
        assert g["C11*C22"] == pytest.approx(1.0, abs=1e-12)
        assert abs(g["C12"]) < 1e-10
        assert g["C21"] == pytest.approx(2.0, abs=1e-9)
        assert g["vanishing_sign"] == -1.0
        assert g["det_continuation"] == pytest.approx(1.0, abs=1e-12)
        assert g["route_gap"] < 1e-10
        assert g["c1_mismatch"] < 1e-10


def test_sin2_monodromy_closed_form(sphere_sin2_solution):
    fs, rep = sphere_sin2_solution
    assert np.allclose(fs.glued.monodromy(), [[5.0, -4.0], [4.0, -3.0]], atol=1e-9)
    assert rep.kind == "parabolic"
    assert not rep.hyperbolic
    assert rep.oracle_trace == pytest.approx(2.0, abs=1e-8)


def test_sin2_oracle_is_unipotent(sphere_sin2):
    M = oracle_monodromy(sphere_sin2)
    assert np.linalg.det(M) == pytest.approx(1.0, abs=1e-9)
    # period of the nonsimple circle, in arc length
    assert M[0, 1] == pytest.approx(4.0 / math.pi, rel=1e-8)
    assert np.allclose(np.diag(M), 1.0, atol=1e-9)


def test_sin2_require_hyperbolic_raises(sphere_sin2):
    with pytest.raises(NotHyperbolicError) as exc:
        fundamental_solution_sphere(sphere_sin2, require_hyperbolic=True)
    assert exc.value.report.kind == "parabolic"


def test_perturbed_is_hyperbolic(sphere_perturbed_solution):
    fs, rep = sphere_perturbed_solution
    assert rep.hyperbolic
    assert rep.trace == pytest.approx(454274.0, rel=1e-11)
    assert abs(rep.trace - rep.oracle_trace) / rep.oracle_trace < 1e-6
    mu = sorted(abs(complex(m)) for m in rep.multipliers)
    assert mu[0] * mu[1] == pytest.approx(1.0, rel=1e-6)
    for g in fs.gluing:
        assert g["C11*C22"] == pytest.approx(1.0, abs=1e-12)
        assert g["C21"] == pytest.approx(26.0, abs=1e-8)
        assert g["c1_mismatch"] < 1e-6


def test_perturbed_curvature_negative_on_circle(sphere_perturbed):
    for seg in gamma1_segments(sphere_perturbed):
        lo, hi = sorted((seg.start, seg.end))
        for s in np.linspace(lo + 0.02, hi - 0.02, 25):
            assert seg.curvature(s) < 0


@pytest.mark.parametrize("x1", [0.125, 0.3])
def test_perturbed_conjugate_absent(sphere_perturbed, sphere_perturbed_solution, x1):
    fs, _ = sphere_perturbed_solution
    res = solve_conjugate_sphere(sphere_perturbed, x1, fs=fs)
    d = res.to_dict()
    assert d["found"] is False
    assert d["x2"] is None
    assert d["report"]["kind"] == "hyperbolic"
    json.dumps(d)


def test_conjugate_rejects_bad_x1(sphere_perturbed, sphere_perturbed_solution):
    with pytest.raises(ValueError):
        solve_conjugate_sphere(sphere_perturbed, 0.7, fs=sphere_perturbed_solution[0])


def test_displayed_equation_regularised(sphere_perturbed):
    segs = gamma1_segments(sphere_perturbed)
    eq = displayed_equation(sphere_perturbed, segs, 0.125, 0.2)
    assert eq["printed_form_diverges"] is True
    assert eq["rhs_denominator_limit"] == 0.0
    assert eq["lhs"] > 0 and math.isfinite(eq["regularised_rhs"])
    assert set(eq) >= {"lhs", "rhs_numerator", "rhs_denominator_arc_slope", "regularised_residual"}


def test_fundamental_json(sphere_perturbed_solution):
    fs, _ = sphere_perturbed_solution
    data = json.loads(fs.dumps(samples=9))
    assert [s["name"] for s in data["segments"]] == ["I_f+", "I_h+", "I_f-", "I_h-"]
    assert len(data["gluing"]) == 4
    assert data["info"]["report"]["kind"] == "hyperbolic"
