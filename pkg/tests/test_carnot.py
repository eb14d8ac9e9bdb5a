import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from gromovlab.carnot import (
    CCOptions,
    CCSolverError,
    cc_distance,
    cc_distance_matrix,
    complex_tangent_projector,
    levi_length,
    make_curve,
)
from gromovlab.domain import DomainError, dc_form
from gromovlab.fixtures import get_fixture, polynomial_domain
from gromovlab.metric_core import check_metric_axioms
from gromovlab.oracles import (
    dp_pair_distances,
    from_c2,
    horizontal_pair_distance,
    vertical_pair_distance,
)


@pytest.fixture(scope="module")
def sphere():
    return get_fixture("ball2")


def sphere_point(seed):
    x = np.random.default_rng(seed).normal(size=4)
    return x / np.linalg.norm(x)


def arc(T, plane, m=65):
    t = np.linspace(0, T, m)
    V = np.zeros((m, 4))
    V[:, 0] = np.cos(t)
    V[:, plane] = np.sin(t)
    return V


def test_projector_at_pole(sphere):
    P = complex_tangent_projector(sphere, [1.0, 0, 0, 0])
    np.testing.assert_allclose(P, np.diag([0, 0, 1.0, 1.0]), atol=1e-12)


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 100_000), st.lists(st.floats(-1, 1), min_size=4, max_size=4))
def test_projector_properties(seed, v):
    dom = get_fixture("ball2_twisted")
    q = sphere_point(seed)
    P = complex_tangent_projector(dom, q)
    J = dom.J(q)
    v = np.array(v)
    np.testing.assert_allclose(P @ P, P, atol=1e-10)
    assert np.trace(P) == pytest.approx(2.0, abs=1e-10)
    np.testing.assert_allclose(P @ J @ P, J @ P, atol=1e-8)
    w = P @ v
    assert abs(dom.rho.grad(q) @ w) < 1e-8
    assert abs(dc_form(dom, q) @ w) < 1e-8


def test_projector_errors(sphere):
    with pytest.raises(DomainError, match="not on the boundary"):
        complex_tangent_projector(sphere, [0.5, 0, 0, 0])
    with pytest.raises(DomainError):
        complex_tangent_projector(get_fixture("disk"), [1.0, 0.0])
    cusp = polynomial_domain("x1**3 - y1**2 - x2**2 - y2**2", 2, ([-1] * 4, [1] * 4), 0.1,
                             witness=[-0.5, 0, 0, 0])
    with pytest.raises(DomainError, match="degenerate"):
        complex_tangent_projector(cusp, np.zeros(4))


@pytest.mark.parametrize("plane", [2, 3])
def test_great_circle_levi_length(sphere, plane):
    # both arcs are horizontal; the Levi form is 4 |v|^2 so the length is 2T
    curve = make_curve(sphere, arc(1.3, plane))
    assert curve.horizontality_residual < 1e-12
    assert levi_length(sphere, curve) == pytest.approx(2 * 1.3, rel=1e-3)
    fine = make_curve(sphere, arc(1.3, plane, m=129))
    assert abs(levi_length(sphere, fine) / levi_length(sphere, curve) - 1) < 1e-3


def test_constant_and_vertical_curves(sphere):
    assert levi_length(sphere, make_curve(sphere, np.tile([1.0, 0, 0, 0], (5, 1)))) == 0.0
    t = np.linspace(0, 1.0, 20)
    fibre = np.stack([np.cos(t), np.sin(t), 0 * t, 0 * t], axis=1)
    with pytest.raises(DomainError, match="not horizontal"):
        levi_length(sphere, make_curve(sphere, fibre))


def test_equal_endpoints(sphere):
    r = cc_distance(sphere, [1.0, 0, 0, 0], [1.0, 0, 0, 0])
    assert r.value == 0.0


def test_endpoints_must_be_on_boundary(sphere):
    with pytest.raises(DomainError):
        cc_distance(sphere, [0.5, 0, 0, 0], [1.0, 0, 0, 0])


def test_horizontal_pair_is_exact(sphere):
    a = np.array([1, 0], complex)
    b = np.cos(1.1) * a + np.sin(1.1) * np.array([0, np.exp(0.4j)])
    r = cc_distance(sphere, from_c2(a), from_c2(b))
    assert r.value == pytest.approx(horizontal_pair_distance(a, b), rel=5e-3)
    assert r.curve.horizontality_residual <= 1e-3
    assert np.max(np.abs(sphere.rho(r.curve.vertices))) <= 1e-8


@pytest.mark.parametrize("psi", [0.1, 1.0, np.pi])
def test_vertical_pair_is_exact(sphere, psi):
    # Chow connectivity: pairs on one Hopf fibre are joined by horizontal curves
    a = np.array([1, 0], complex)
    r = cc_distance(sphere, from_c2(a), from_c2(np.exp(1j * psi) * a))
    assert r.value == pytest.approx(vertical_pair_distance(psi), rel=5e-3)


def test_refinement_trace(sphere):
    r = cc_distance(sphere, sphere_point(1), sphere_point(2))
    counts = [k for k, _ in r.refinement_trace]
    vals = np.array([v for _, v in r.refinement_trace])
    assert counts == [9, 17, 33]
    assert r.value == vals[-1]
    # non-increasing up to the O(h^2) chord bias, and converging
    assert np.all(np.diff(vals) <= 1e-2 * vals[:-1])
    assert abs(vals[2] - vals[1]) < abs(vals[1] - vals[0]) + 1e-9


def test_symmetry_and_dp_oracle(sphere):
    A = [sphere_point(s) for s in (10, 11, 12)]
    B = [sphere_point(s) for s in (20, 21, 22)]
    dp = dp_pair_distances(A, B)
    opts = CCOptions()
    for a, b, o in zip(A, B, dp):
        d1 = cc_distance(sphere, a, b, opts).value
        d2 = cc_distance(sphere, b, a, opts).value
        assert abs(d1 - d2) <= 2 * opts.solver_tol * max(d1, d2)
        assert abs(d1 / o - 1) < 0.05


def test_solver_reports_failure(sphere):
    opts = CCOptions(horiz_tol=1e-12, max_continuation=1, restarts=0)
    with pytest.raises(CCSolverError, match="no horizontal curve"):
        cc_distance(sphere, sphere_point(3), sphere_point(4), opts)


def test_matrix_with_duplicate_sample(sphere):
    X = [sphere_point(5), sphere_point(6), sphere_point(5)]
    ms = cc_distance_matrix(sphere, X)
    assert ms.dist[0, 2] == 0.0
    assert ms.dist[0, 1] == pytest.approx(ms.dist[1, 2], rel=2e-3)
    assert check_metric_axioms(ms, atol=1e-9, rtol=CCOptions().solver_tol).ok


def test_planar_gauge():
    disk = get_fixture("disk")
    r = cc_distance(disk, [1.0, 0.0], [0.0, 1.0])
    assert r.method == "planar_gauge"
    assert r.value == pytest.approx(np.sqrt(8 * np.pi * np.pi / 2), rel=1e-6)
    # shorter arc is used
    t = 4.0
    r2 = cc_distance(disk, [1.0, 0.0], [np.cos(t), np.sin(t)])
    assert r2.value == pytest.approx(np.sqrt(8 * np.pi * (2 * np.pi - t)), rel=1e-6)
