import math

import numpy as np
import pytest

from jacobi_hill.errors import BranchPointError, MetricValidationError
from jacobi_hill.metrics import (
    ConformalChartMetric,
    KolokoltsovSphereMetric,
    LiouvilleTorusMetric,
    RejectionReport,
    branch_distance,
    branch_points,
    involution_image,
    metric_from_config,
    validate_kolokoltsov,
)

from conftest import SIN2, SIN2_Y


def fd_curvature(metric, x, y, h=1e-3):
    """5-point Laplacian of ln(lambda), fourth order in h."""
    g = lambda a, b: math.log(metric.lam(a, b))
    c = [-1 / 12, 4 / 3, -5 / 2, 4 / 3, -1 / 12]
    offs = [-2, -1, 0, 1, 2]
    gxx = sum(w * g(x + k * h, y) for w, k in zip(c, offs)) / h**2
    gyy = sum(w * g(x, y + k * h) for w, k in zip(c, offs)) / h**2
    return -(gxx + gyy) / (2 * metric.lam(x, y))


def test_lambda_partials_example_torus(torus):
    p = torus.lambda_partials(0.0, 0.0, 2)
    assert p.lam == pytest.approx(3.0)
    assert p.lx == pytest.approx(0.0, abs=1e-14)
    assert p.ly == pytest.approx(0.0, abs=1e-14)
    assert p.lyy == pytest.approx(4 * math.pi**2, rel=1e-14)
    assert p.lxy == 0.0
    q = torus.lambda_partials(0.25, 0.0, 1)
    assert q.lam == pytest.approx(2.0)
    assert q.lx == pytest.approx(-2 * math.pi, rel=1e-14)


def test_constant_lambda(flat):
    p = flat.lambda_partials(0.3, -1.2, 2)
    assert p.lam == 1.0
    assert (p.lx, p.ly, p.lxx, p.lxy, p.lyy) == (0.0, 0.0, 0.0, 0.0, 0.0)
    assert flat.gauss_curvature(0.3, 0.2) == 0.0


def test_round_sphere_curvature(round_sphere, rng):
    for _ in range(5):
        x, y = rng.uniform(-2, 2, 2)
        assert round_sphere.gauss_curvature(x, y) == pytest.approx(1.0, abs=1e-8)


def test_example_torus_curvature_value(torus):
    # [DERIVED] f = 2, f' = -2 pi, f'' = 0, h''(0) = 4 pi^2  ->  K = -pi^2 / 4
    assert torus.gauss_curvature(0.25, 0.0) == pytest.approx(-math.pi**2 / 4, rel=1e-12)
    assert torus.gauss_curvature(0.25, 0.0) == pytest.approx(fd_curvature(torus, 0.25, 0.0), rel=1e-6)


@pytest.mark.parametrize("which", ["torus", "round_sphere", "sphere_sin2"])
def test_curvature_matches_fd_laplacian(which, request, rng):
    metric = request.getfixturevalue(which)
    worst = 0.0
    for _ in range(100):
        if which == "round_sphere":
            x, y = rng.uniform(-2, 2, 2)
        else:
            while True:
                x, y = rng.uniform(0, 1, 2)
                if branch_distance(x, y) > 0.05:
                    break
        K = metric.gauss_curvature(x, y)
        worst = max(worst, abs(K - fd_curvature(metric, x, y)) / max(1.0, abs(K)))
    assert worst < 1e-5


def test_torus_periodicity(torus, rng):
    for _ in range(20):
        x, y = rng.uniform(0, 1, 2)
        K = torus.gauss_curvature(x, y)
        assert torus.gauss_curvature(x + 1, y - 1) == pytest.approx(K, rel=1e-12, abs=1e-12)


def test_sphere_involution_invariance(sphere_sin2, rng):
    for _ in range(20):
        x, y = rng.uniform(0, 1, 2)
        xs, ys = involution_image(x, y)
        assert sphere_sin2.lam(xs, ys) == pytest.approx(sphere_sin2.lam(x, y), abs=1e-12)


def test_involution_fixed_points():
    assert involution_image(0.3, 0.2) == pytest.approx((0.7, 0.8))
    assert involution_image(0.0, 0.5) == (0.0, 0.5)
    assert involution_image(0.5, 0.5) == (0.5, 0.5)
    for L in (1.0, 0.8):
        for bx, by in branch_points(L):
            assert involution_image(bx, by, L) == pytest.approx((bx, by))


def test_torus_validation():
    with pytest.raises(MetricValidationError) as info:
        LiouvilleTorusMetric("2 + x", "1 - cos(2*pi*y)")
    assert info.value.invariant == "f periodic"
    with pytest.raises(MetricValidationError) as info:
        LiouvilleTorusMetric("2", "1 - cos(2*pi*y)")
    assert info.value.invariant == "f nonconstant"
    with pytest.raises(MetricValidationError) as info:
        LiouvilleTorusMetric("cos(2*pi*x) - 3", "1 - cos(2*pi*y)")
    assert info.value.invariant == "f + h positive"
    # only the sum has to be positive; constants move freely between f and h
    LiouvilleTorusMetric("cos(2*pi*x) - 0.5", "3 - cos(2*pi*y)")
    with pytest.raises(MetricValidationError):
        LiouvilleTorusMetric("cos(2*pi*x)", "1 - cos(2*pi*y)", L=-1.0)


def test_kolokoltsov_accepts_sin2():
    m = validate_kolokoltsov(SIN2, SIN2_Y, 1.0, 4)
    assert isinstance(m, KolokoltsovSphereMetric)
    assert m.smoothness_order == 4
    assert m.branch_points == ((0.0, 0.0), (0.0, 0.5), (0.5, 0.0), (0.5, 0.5))
    for m_ in range(1, 7):
        d = m.f.derivative(m_)(0.0)
        if m_ % 2:
            assert d == pytest.approx(0.0, abs=1e-9)


def test_kolokoltsov_rejections():
    r = validate_kolokoltsov(SIN2, "2*sin(2*pi*y)^2", 1.0, 4)
    assert isinstance(r, RejectionReport) and not r
    assert r.condition == "condition 2"
    assert r.details["h''(0)"] == pytest.approx(16 * math.pi**2)
    assert r.details["f''(0)"] == pytest.approx(8 * math.pi**2)
    r = validate_kolokoltsov("sin(pi*x)^2", SIN2_Y, 1.0, 0)
    assert r.condition == "condition 1"
    r = validate_kolokoltsov("x^2", SIN2_Y, 1.0, 0)
    assert r.condition == "periodicity"
    r = validate_kolokoltsov("sin(2*pi*x)^2 + 0.1*sin(2*pi*x)^3 + 0.1*sin(2*pi*x)^4", SIN2_Y, 1.0, 0)
    assert r.condition in ("condition 2", "condition 3")


def test_kolokoltsov_smoothness_order():
    # h = f + eps sin^4 keeps conditions 1-3 and all data through order 3,
    # but the fourth derivatives at the branch points differ
    h = "sin(2*pi*y)^2 + 0.2*sin(2*pi*y)^4"
    assert validate_kolokoltsov(SIN2, h, 1.0, 1)
    r = validate_kolokoltsov(SIN2, h, 1.0, 2)
    assert not r
    assert r.condition == "smoothness"
    assert r.details["order"] == 4


def test_branch_point_refusal(sphere_sin2):
    with pytest.raises(BranchPointError):
        sphere_sin2.lam(1e-9, 0.0)
    with pytest.raises(BranchPointError):
        sphere_sin2.gauss_curvature(0.5, 0.5 + 1e-9)
    assert sphere_sin2.lam(1e-3, 0.0) > 0


def test_conformal_chart_positivity():
    with pytest.raises(MetricValidationError):
        ConformalChartMetric("x", domain=(-1, 1, -1, 1))
    m = ConformalChartMetric("1 + x^2 + y^2")
    assert m.lam(1.0, 1.0) == 3.0


def test_metric_from_config():
    m = metric_from_config({"kind": "liouville-torus", "f": "2 + cos(2*pi*x)", "h": "1 - cos(2*pi*y)"})
    assert isinstance(m, LiouvilleTorusMetric)
    with pytest.raises(MetricValidationError) as info:
        metric_from_config({"kind": "kolokoltsov-sphere", "f": SIN2, "h": "2*sin(2*pi*y)^2", "smoothness_k": 2})
    assert info.value.invariant == "condition 2"
