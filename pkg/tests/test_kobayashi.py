import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from gromovlab.curves import PolylineCurve, sunflower_disk
from gromovlab.domain import DomainError
from gromovlab.fixtures import get_fixture
from gromovlab.kobayashi import (
    KobayashiEstimator,
    band_infinitesimal,
    fit_band_constant,
    kob_distance_graph,
    kob_length,
    kobayashi_metric_ball,
    oracle_distance_ball,
    oracle_matrix_ball,
)
from gromovlab.metric_core import check_metric_axioms

ARCTANH_HALF = 0.5493061443340549


@pytest.fixture(scope="module")
def disk():
    return get_fixture("disk")


@pytest.fixture(scope="module")
def ball():
    return get_fixture("ball2")


def disk_point(r, t):
    return np.array([r * np.cos(t), r * np.sin(t)])


def test_band_at_centre(ball):
    v = np.array([0.0, 0.6, 0.8, 0.0])
    band = band_infinitesimal(ball, np.zeros(4), v, C=3.0)
    assert (band.lower, band.upper) == (pytest.approx(1 / 3), pytest.approx(3.0))
    assert band_infinitesimal(ball, np.zeros(4), np.zeros(4), C=3.0).upper == 0.0


def test_band_near_boundary(disk):
    # B^2 = 4 (0.9)^2 / 0.19^2 + 1 / 0.19 for rho = |z|^2 - 1
    B2 = 4 * 0.81 / 0.19 ** 2 + 1 / 0.19
    band = band_infinitesimal(disk, [0.9, 0.0], [1.0, 0.0], C=1.0)
    assert band.upper == pytest.approx(np.sqrt(B2), rel=1e-9)
    K = float(kobayashi_metric_ball(np.array([0.9, 0.0]), np.array([1.0, 0.0])))
    assert K == pytest.approx(1 / 0.19, rel=1e-12)
    C = fit_band_constant(disk, [[0.9, 0.0]], [[1.0, 0.0]])
    assert np.sqrt(B2) / K <= C < np.sqrt(B2) / K * 2 ** (1 / 64) + 1e-12


def test_band_rejects_exterior(disk):
    with pytest.raises(DomainError):
        band_infinitesimal(disk, [1.0, 0.0], [1.0, 0.0], C=2.0)
    with pytest.raises(ValueError):
        band_infinitesimal(disk, [0.0, 0.0], [1.0, 0.0], C=0.5)


def test_fit_is_one_at_centre(ball):
    V = np.random.default_rng(0).normal(size=(10, 4))
    assert fit_band_constant(ball, np.zeros((10, 4)), V) == 1.0


def test_fit_needs_oracle():
    with pytest.raises(DomainError, match="no Kobayashi oracle"):
        fit_band_constant(get_fixture("ellipsoid"), [[0.1, 0, 0, 0]], [[1.0, 0, 0, 0]])


def test_disk_oracle_values():
    assert oracle_distance_ball(1, [0, 0], [0, 0]) == 0.0
    assert oracle_distance_ball(1, [0, 0], [0.5, 0]) == pytest.approx(ARCTANH_HALF, abs=1e-12)
    assert oracle_distance_ball(1, [0.3, 0.3], [0.3, 0.3]) == 0.0
    with pytest.raises(DomainError):
        oracle_distance_ball(1, [1.0, 0.0], [0.0, 0.0])


@settings(max_examples=50, deadline=None)
@given(st.floats(0, 0.95), st.floats(0, 6.3), st.floats(0, 0.95), st.floats(0, 6.3))
def test_disk_oracle_symmetric_and_mobius_invariant(r1, t1, r2, t2):
    p, q = disk_point(r1, t1), disk_point(r2, t2)
    d = oracle_distance_ball(1, p, q)
    assert d == pytest.approx(oracle_distance_ball(1, q, p), abs=1e-12)
    # rotation invariance
    R = np.array([[np.cos(0.7), -np.sin(0.7)], [np.sin(0.7), np.cos(0.7)]])
    assert d == pytest.approx(oracle_distance_ball(1, R @ p, R @ q), abs=1e-9)


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 10_000))
def test_ball_distance_matches_matrix_and_metric(seed):
    rng = np.random.default_rng(seed)
    P = rng.normal(size=(6, 4))
    P *= (rng.uniform(0, 0.9, size=6) / np.linalg.norm(P, axis=1))[:, None]
    D = oracle_matrix_ball(2, P)
    for i in range(6):
        for j in range(6):
            assert D[i, j] == pytest.approx(oracle_distance_ball(2, P[i], P[j]), abs=1e-7)
    from gromovlab.metric_core import FiniteMetricSpace
    assert check_metric_axioms(FiniteMetricSpace.from_matrix(D), atol=1e-9).ok


def test_radial_length_converges(disk):
    est = KobayashiEstimator.for_domain(disk)
    errs = []
    for k in range(2, 8):
        c = PolylineCurve.segment([0, 0], [0.5, 0], pieces=2 ** k)
        errs.append(abs(kob_length(disk, c, est) - ARCTANH_HALF))
    assert errs[-1] < 1e-5
    assert all(b < a for a, b in zip(errs, errs[1:]))


def test_length_orderings(disk):
    c = PolylineCurve(np.array([[0.1, 0.2], [0.5, -0.3], [-0.2, -0.6]])).subdivide(8)
    up = kob_length(disk, c, KobayashiEstimator("band_upper", 3.0))
    lo = kob_length(disk, c, KobayashiEstimator("band_lower", 3.0))
    mid = kob_length(disk, c, KobayashiEstimator("band_midpoint", 3.0))
    assert lo <= mid <= up
    assert up == pytest.approx(9 * lo)
    assert kob_length(disk, PolylineCurve(np.zeros((3, 2))), KobayashiEstimator.for_domain(disk)) == 0.0


def test_length_names_exiting_vertex(disk):
    c = PolylineCurve(np.array([[0.0, 0.0], [0.5, 0.0], [1.2, 0.0]]))
    with pytest.raises(DomainError, match="vertex 2"):
        kob_length(disk, c, KobayashiEstimator.for_domain(disk))


def test_estimator_validation(disk):
    with pytest.raises(ValueError):
        KobayashiEstimator("oracle")
    with pytest.raises(ValueError):
        KobayashiEstimator("median", 2.0)
    with pytest.raises(DomainError):
        kob_length(get_fixture("ellipsoid"), PolylineCurve.segment(np.zeros(4), [0.1, 0, 0, 0]),
                   KobayashiEstimator("oracle", oracle_id="ball"))


def test_two_sample_graph_equals_segment_length(disk):
    est = KobayashiEstimator.for_domain(disk)
    X = np.array([[0.0, 0.0], [0.3, 0.1]])
    ms = kob_distance_graph(disk, X, k_neighbors=1, pieces=4)
    seg = kob_length(disk, PolylineCurve.segment(X[0], X[1], pieces=4), est)
    assert ms.dist[0, 1] == pytest.approx(seg, rel=1e-12)


def test_graph_distance_on_disk(disk):
    X = np.vstack([[0.0, 0.0], [0.5, 0.0], sunflower_disk(498, 0.95)])
    ms = kob_distance_graph(disk, X, k_neighbors=8)
    assert abs(ms.dist[0, 1] / ARCTANH_HALF - 1) < 0.05
    assert ms.dist[0, 1] >= ARCTANH_HALF - 1e-9  # graph paths overestimate
    assert check_metric_axioms(ms, atol=1e-9).ok


def test_disconnected_graph_is_reported(disk):
    X = np.vstack([sunflower_disk(20, 0.1), sunflower_disk(20, 0.1) + [0.7, 0.0]])
    with pytest.raises(DomainError, match="disconnected"):
        kob_distance_graph(disk, X, k_neighbors=3)
