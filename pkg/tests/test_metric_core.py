import itertools

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import shortest_path

from gromovlab.metric_core import (
    FiniteMetricSpace,
    check_metric_axioms,
    delta_four_point,
    fit_distortion,
    gromov_product,
    quadruple_defect,
)


def tree_metric(parents, weights):
    n = len(parents) + 1
    rows = np.arange(1, n)
    G = coo_matrix((weights, (rows, parents)), shape=(n, n))
    return shortest_path(G, directed=False)


def brute_delta(D):
    n = len(D)
    best = 0.0
    for q in itertools.combinations(range(n), 4):
        a, b, c, e = q
        s = sorted([D[a, b] + D[c, e], D[a, c] + D[b, e], D[a, e] + D[b, c]])
        best = max(best, 0.5 * (s[2] - s[1]))
    return best


@st.composite
def trees(draw, max_n=14):
    n = draw(st.integers(4, max_n))
    parents = [draw(st.integers(0, i)) for i in range(n - 1)]
    weights = draw(st.lists(st.floats(0.05, 5.0), min_size=n - 1, max_size=n - 1))
    return tree_metric(parents, weights)


@settings(max_examples=40, deadline=None)
@given(trees())
def test_tree_metrics_are_zero_hyperbolic(D):
    rep = delta_four_point(FiniteMetricSpace.from_matrix(D))
    assert rep.delta <= 1e-12


def test_unit_square():
    X = np.array([[0, 0], [1, 0], [1, 1], [0, 1]], float)
    rep = delta_four_point(FiniteMetricSpace.from_points(X))
    assert abs(rep.delta - (np.sqrt(2) - 1)) < 1e-12
    assert rep.quadruples_checked == 1
    assert sorted(rep.worst_quadruple) == [0, 1, 2, 3]


@settings(max_examples=25, deadline=None)
@given(st.integers(5, 11), st.integers(0, 10_000))
def test_exhaustive_matches_brute_force(n, seed):
    X = np.random.default_rng(seed).normal(size=(n, 3))
    ms = FiniteMetricSpace.from_points(X)
    assert delta_four_point(ms).delta == pytest.approx(brute_delta(ms.dist), abs=1e-12)


def test_worst_quadruple_attains_delta():
    X = np.random.default_rng(3).normal(size=(12, 2))
    ms = FiniteMetricSpace.from_points(X)
    rep = delta_four_point(ms)
    q = rep.worst_quadruple
    defects = [quadruple_defect(ms.dist, *p) for p in itertools.permutations(q)]
    assert max(defects) == pytest.approx(rep.delta, abs=1e-12)


def test_monte_carlo_is_lower_bound_and_reproducible():
    X = np.random.default_rng(4).normal(size=(30, 2))
    ms = FiniteMetricSpace.from_points(X)
    ex = delta_four_point(ms).delta
    r1 = delta_four_point(ms, mode="monte_carlo", budget=20_000, seed=9)
    r2 = delta_four_point(ms, mode="monte_carlo", budget=20_000, seed=9)
    assert r1 == r2
    assert r1.delta <= ex + 1e-12
    assert r1.quadruples_checked == 20_000


def test_budget_and_size_errors():
    ms = FiniteMetricSpace.from_points(np.random.default_rng(0).normal(size=(40, 2)))
    with pytest.raises(ValueError, match="budget"):
        delta_four_point(ms, budget=100)
    with pytest.raises(ValueError):
        delta_four_point(ms.subspace([0, 1, 2]))


def test_gromov_product_on_line():
    ms = FiniteMetricSpace.from_points(np.array([[0.0], [1.0], [3.0]]), points=("a", "b", "c"))
    assert gromov_product(ms, "b", "c", "a") == pytest.approx(1.0)
    assert gromov_product(ms, "a", "c", "b") == pytest.approx(0.0)


def test_axiom_report_flags_each_defect():
    D = np.array([[0.0, 1.0, 5.0], [1.0, 0.0, 1.0], [5.0, 1.0, 0.0]])
    rep = check_metric_axioms(FiniteMetricSpace.from_matrix(D))
    assert not rep.ok
    assert rep.triangle == [(0, 2, 1, 3.0)]
    D2 = D.copy()
    D2[0, 1] = 2.0
    D2[1, 1] = 0.5
    rep2 = check_metric_axioms(FiniteMetricSpace.from_matrix(D2))
    assert rep2.asymmetry and rep2.diagonal


def test_euclidean_points_satisfy_axioms():
    ms = FiniteMetricSpace.from_points(np.random.default_rng(1).normal(size=(25, 4)))
    assert check_metric_axioms(ms).ok


def test_rejects_malformed_matrices():
    with pytest.raises(ValueError):
        FiniteMetricSpace.from_matrix(np.zeros((2, 3)))
    with pytest.raises(ValueError):
        FiniteMetricSpace.from_matrix(np.array([[0.0, np.nan], [np.nan, 0.0]]))
    with pytest.raises(ValueError):
        FiniteMetricSpace.from_matrix(np.array([[0.0, -1.0], [-1.0, 0.0]]))
    with pytest.raises(ValueError):
        FiniteMetricSpace.from_matrix(np.zeros((2, 2)), points=("a", "a"))


def test_scaled_copy_fits_lambda_two():
    ms = FiniteMetricSpace.from_points(np.random.default_rng(2).normal(size=(15, 2)))
    fit = fit_distortion(ms, FiniteMetricSpace.from_matrix(2 * ms.dist))
    assert fit.lam == pytest.approx(2.0, abs=1e-12)
    assert fit.c == pytest.approx(0.0, abs=1e-12)
    assert fit.violation_fraction == 0.0


def test_shifted_copy_fits_rough_one():
    ms = FiniteMetricSpace.from_points(np.random.default_rng(2).normal(size=(15, 2)))
    B = ms.dist + 1.0
    np.fill_diagonal(B, 0.0)
    fit = fit_distortion(ms, FiniteMetricSpace.from_matrix(B), kind="rough")
    assert (fit.lam, fit.c, fit.violation_fraction) == (1.0, pytest.approx(1.0, abs=1e-12), 0.0)


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 10_000), st.floats(1.0, 6.0), st.floats(0.0, 3.0))
def test_quasi_fit_is_feasible(seed, lam, shift):
    rng = np.random.default_rng(seed)
    ms = FiniteMetricSpace.from_points(rng.normal(size=(10, 2)))
    B = lam * ms.dist + shift * rng.uniform(0, 1, size=ms.dist.shape)
    B = 0.5 * (B + B.T)
    np.fill_diagonal(B, 0.0)
    fit = fit_distortion(ms, FiniteMetricSpace.from_matrix(B))
    assert fit.violation_fraction == 0.0
    assert fit.lam >= 1.0 and fit.c >= 0.0


def test_json_and_csv_round_trip():
    ms = FiniteMetricSpace.from_points(np.random.default_rng(5).normal(size=(6, 2)),
                                       points=("p", "q", "r", "s", "t", "u"))
    for back in (FiniteMetricSpace.from_json(ms.to_json()), FiniteMetricSpace.from_csv(ms.to_csv())):
        assert back.points == ms.points
        np.testing.assert_array_equal(back.dist, ms.dist)


def test_distance_matrix_is_read_only():
    ms = FiniteMetricSpace.from_points(np.eye(3))
    with pytest.raises(ValueError):
        ms.dist[0, 1] = 3.0
