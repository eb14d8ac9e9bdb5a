import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from gromovlab.domain import DomainError
from gromovlab.fixtures import get_fixture, polynomial_domain
from gromovlab.morse import (
    boundary_connectedness,
    component_counts,
    find_critical_points,
    index_bound_check,
    normal_form_fit,
    slab_mask,
)


@pytest.fixture(scope="module")
def ball():
    return get_fixture("ball2")


@pytest.fixture(scope="module")
def indexed():
    return get_fixture("indexed_psh")


def test_ball_has_one_minimum(ball):
    cps = find_critical_points(ball)
    assert len(cps) == 1
    cp = cps[0]
    np.testing.assert_allclose(cp.location, 0.0, atol=1e-9)
    assert (cp.index, cp.value, cp.nondegenerate) == (0, pytest.approx(-1.0), True)
    assert index_bound_check(ball, cp) is True


def test_indexed_point(indexed):
    (cp,) = find_critical_points(indexed)
    np.testing.assert_allclose(cp.hessian_eigenvalues, [-2, 2, 2, 6], atol=1e-6)
    assert cp.index == 1
    assert index_bound_check(indexed, cp) is True
    nf = normal_form_fit(indexed, cp)
    assert nf.signs.tolist() == [1, 1, 1, -1]
    assert nf.index == cp.index
    assert nf.max_ratio < 1e-9


def test_degenerate_point_is_flagged():
    dom = get_fixture("degenerate")
    cps = find_critical_points(dom)
    assert len(cps) == 1 and not cps[0].nondegenerate
    with pytest.raises(DomainError, match="nondegenerate"):
        normal_form_fit(dom, cps[0])


def test_index_bound_skipped_without_psh():
    dom = get_fixture("index3")
    (cp,) = find_critical_points(dom)
    assert cp.index == 3 > dom.n
    assert index_bound_check(dom, cp) is None


def test_cubic_remainder_is_bounded():
    dom = get_fixture("cubic_ball")
    (cp,) = find_critical_points(dom)
    nf = normal_form_fit(dom, cp)
    # x1^3/10 in coordinates scaled by 1: remainder / r^3 stays near 0.1
    assert np.all(nf.ratios <= 0.1 + 1e-9)
    assert nf.ratios[-1] == pytest.approx(nf.ratios[0], rel=0.1)


@settings(max_examples=10, deadline=None)
@given(st.lists(st.sampled_from([1.0, 2.0, 3.0, -1.0, -2.0]), min_size=4, max_size=4))
def test_quadratic_index_matches_signs(coeffs):
    expr = " + ".join(f"({c})*{v}**2" for c, v in zip(coeffs, ["x1", "y1", "x2", "y2"])) + " - 1"
    dom = polynomial_domain(expr, 2, ([-1.0] * 4, [1.0] * 4), 0.1)
    (cp,) = find_critical_points(dom, restarts=8)
    nf = normal_form_fit(dom, cp)
    assert cp.index == sum(c < 0 for c in coeffs) == nf.index
    assert nf.max_ratio < 1e-9


def test_every_point_is_critical(ball):
    for name in ("ball2", "indexed_psh", "ellipsoid"):
        dom = get_fixture(name)
        for cp in find_critical_points(dom):
            assert np.linalg.norm(dom.rho.grad(cp.location)) <= 1e-8 * 10


@pytest.mark.parametrize("res", [24, 48])
def test_ball_counts(ball, res):
    assert component_counts(ball, [0.5, 0.9, 1.1], res).counts == [1, 1, 0]


@pytest.mark.parametrize("res", [24, 48])
def test_count_jumps_across_index_one_value(indexed, res):
    assert component_counts(indexed, [0.7, 1.3], res).counts == [1, 2]


def test_slab_mask_matches_counts(ball):
    assert slab_mask(ball, 0.0, 16).any()
    assert not slab_mask(ball, 1.5, 16).any()


def test_connected_verdicts(ball):
    v = boundary_connectedness(ball)
    assert (v.connected, v.components, v.refused) == (True, 1, False)
    assert v.trace.counts[-1] == 1
    assert boundary_connectedness(get_fixture("ellipsoid")).connected


def test_two_shell_refused():
    v = boundary_connectedness(get_fixture("two_shell"))
    assert v.refused and v.connected is None
    assert v.components == 2
    assert v.psh_min_eigenvalue < 0
    assert "refused" in v.note
