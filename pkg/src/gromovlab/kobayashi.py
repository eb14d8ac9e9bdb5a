"""Kobayashi metric: two-sided band from the defining function, exact ball
oracles, curve lengths and graph estimates of the integrated distance."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import connected_components, dijkstra
from scipy.spatial import cKDTree

from .curves import PolylineCurve
from .domain import Domain, DomainError, dc_form
from .metric_core import FiniteMetricSpace

STRATEGIES = ("oracle", "band_midpoint", "band_upper", "band_lower")
DEFAULT_C = 4.0


@dataclass(frozen=True)
class MetricBand:
    lower: float
    upper: float


@dataclass(frozen=True)
class KobayashiEstimator:
    strategy: str = "oracle"
    C: float = DEFAULT_C
    oracle_id: Optional[str] = None

    def __post_init__(self):
        if self.strategy not in STRATEGIES:
            raise ValueError(f"unknown strategy {self.strategy!r}")
        if self.C < 1:
            raise ValueError("band constant C must be >= 1")
        if self.strategy == "oracle" and self.oracle_id is None:
            raise ValueError("oracle strategy needs an oracle_id")

    @classmethod
    def for_domain(cls, dom: Domain, strategy: str = "oracle", C: float = DEFAULT_C):
        return cls(strategy, C, dom.oracle if strategy == "oracle" else None)


def _complex_pair(X):
    X = np.asarray(X, float)
    return X[..., 0::2] + 1j * X[..., 1::2]


def band_core(dom: Domain, P, V) -> np.ndarray:
    """B(p, v) = [|d rho(v) + i d^c rho(v)|^2 / rho^2 + |v|^2 / |rho|]^(1/2), batched."""
    P = np.asarray(P, float)
    V = np.asarray(V, float)
    r = dom.rho(P)
    if np.any(r >= 0):
        raise DomainError("band needs interior points (rho < 0)")
    drho = np.einsum("...i,...i->...", dom.rho.grad(P), V)
    dc = np.einsum("...i,...i->...", dc_form(dom, P), V)
    vv = np.einsum("...i,...i->...", V, V)
    return np.sqrt((drho ** 2 + dc ** 2) / r ** 2 + vv / np.abs(r))


def band_infinitesimal(dom: Domain, p, v, C: float) -> MetricBand:
    if C < 1:
        raise ValueError("band constant C must be >= 1")
    p = np.asarray(p, float)
    if not dom.contains(p):
        raise DomainError(f"point {p.tolist()} is not interior")
    B = float(band_core(dom, p, v))
    return MetricBand(B / C, C * B)


def kobayashi_metric_ball(P, V) -> np.ndarray:
    """Exact infinitesimal Kobayashi metric of the unit ball in C^n.

    K(z, v)^2 = |v|^2 / (1 - |z|^2) + |<z, v>|^2 / (1 - |z|^2)^2, so that
    K(0, v) = |v| and the integrated distance is arctanh of the Moebius gauge.
    """
    z, w = _complex_pair(P), _complex_pair(V)
    s = 1.0 - np.sum(np.abs(z) ** 2, axis=-1)
    if np.any(s <= 0):
        raise DomainError("ball oracle needs |z| < 1")
    zv = np.sum(np.conj(z) * w, axis=-1)
    return np.sqrt(np.sum(np.abs(w) ** 2, axis=-1) / s + np.abs(zv) ** 2 / s ** 2)


def oracle_distance_ball(n: int, p, q) -> float:
    """Kobayashi distance of the unit ball in C^n with d(0, z) = arctanh|z|."""
    z, w = _complex_pair(p), _complex_pair(q)
    if z.shape[-1] != n or w.shape[-1] != n:
        raise ValueError(f"points must have {2 * n} real coordinates")
    zz, ww = np.sum(np.abs(z) ** 2), np.sum(np.abs(w) ** 2)
    if zz >= 1 or ww >= 1:
        raise DomainError("points must lie strictly inside the unit ball")
    if n == 1:
        t = abs((z[0] - w[0]) / (1 - np.conj(z[0]) * w[0]))
    else:
        zw = np.sum(np.conj(z) * w)
        t2 = 1.0 - (1 - zz) * (1 - ww) / abs(1 - zw) ** 2
        t = np.sqrt(max(t2, 0.0))
    return float(np.arctanh(min(t, 1.0 - 1e-16)))


def oracle_matrix_ball(n: int, P) -> np.ndarray:
    P = np.asarray(P, float)
    z = _complex_pair(P)
    zz = np.sum(np.abs(z) ** 2, axis=-1)
    G = z.conj() @ z.T  # G[i, j] = <z_i, z_j>
    t2 = 1.0 - np.outer(1 - zz, 1 - zz) / np.abs(1 - G) ** 2
    D = np.arctanh(np.sqrt(np.clip(t2, 0.0, 1.0 - 1e-16)))
    np.fill_diagonal(D, 0.0)
    return 0.5 * (D + D.T)


_ORACLES = {"ball": kobayashi_metric_ball}


def infinitesimal(dom: Domain, est: KobayashiEstimator, P, V) -> np.ndarray:
    if est.strategy == "oracle":
        if est.oracle_id != dom.oracle:
            raise DomainError(f"oracle {est.oracle_id!r} does not match domain {dom.name!r}")
        return _ORACLES[est.oracle_id](P, V)
    B = band_core(dom, P, V)
    if est.strategy == "band_upper":
        return est.C * B
    if est.strategy == "band_lower":
        return B / est.C
    return B  # band_midpoint: geometric centre of [B/C, C B]


def kob_length(dom: Domain, curve: PolylineCurve, est: KobayashiEstimator) -> float:
    """Composite-midpoint quadrature of the Kobayashi length of a polyline."""
    V = curve.vertices
    inside = dom.contains(V)
    if not np.all(inside):
        k = int(np.argmin(inside))
        raise DomainError(f"curve leaves D at vertex {k}: {V[k].tolist()}")
    if len(V) < 2:
        return 0.0
    mid, step = curve.segments
    nz = np.linalg.norm(step, axis=1) > 0
    if not np.any(nz):
        return 0.0
    return float(np.sum(infinitesimal(dom, est, mid[nz], step[nz])))


def _segment_lengths(dom, est, A, B, pieces):
    s = (np.arange(pieces) + 0.5) / pieces
    mids = A[:, None, :] + s[None, :, None] * (B - A)[:, None, :]
    steps = np.repeat(((B - A) / pieces)[:, None, :], pieces, axis=1)
    vals = infinitesimal(dom, est, mids.reshape(-1, A.shape[1]), steps.reshape(-1, A.shape[1]))
    return vals.reshape(len(A), pieces).sum(axis=1)


def kob_graph_edges(dom: Domain, samples, k_neighbors: int = 8, est: KobayashiEstimator = None,
                    pieces: int = 4, prune_checks: int = 16):
    X = np.asarray(samples, float)
    if not np.all(dom.contains(X)):
        k = int(np.argmin(dom.contains(X)))
        raise DomainError(f"sample {k} is not interior: {X[k].tolist()}")
    tree = cKDTree(X)
    k = min(k_neighbors + 1, len(X))
    _, nb = tree.query(X, k=k)
    I = np.repeat(np.arange(len(X)), k - 1)
    Jn = nb[:, 1:].ravel()
    lo, hi = np.minimum(I, Jn), np.maximum(I, Jn)
    pairs = np.unique(np.stack([lo, hi], axis=1), axis=0)
    pairs = pairs[pairs[:, 0] != pairs[:, 1]]
    A, B = X[pairs[:, 0]], X[pairs[:, 1]]
    # drop segments that leave D
    s = (np.arange(prune_checks) + 1.0) / (prune_checks + 1.0)
    probe = A[:, None, :] + s[None, :, None] * (B - A)[:, None, :]
    keep = np.all(dom.contains(probe.reshape(-1, X.shape[1])).reshape(len(A), prune_checks), axis=1)
    pairs, A, B = pairs[keep], A[keep], B[keep]
    w = _segment_lengths(dom, est, A, B, pieces)
    return pairs, w


def kob_distance_graph(dom: Domain, samples, k_neighbors: int = 8,
                       est: KobayashiEstimator = None, pieces: int = 4,
                       sources=None, points=None) -> FiniteMetricSpace:
    """Graph estimate of the Kobayashi distance.

    Euclidean k-NN graph on the samples; each edge weighs the Kobayashi
    length of the straight segment (``pieces`` midpoint cells). Returns all
    shortest-path distances, or only among ``sources`` when given.
    """
    est = est or KobayashiEstimator.for_domain(dom)
    X = np.asarray(samples, float)
    pairs, w = kob_graph_edges(dom, X, k_neighbors, est, pieces)
    n = len(X)
    G = coo_matrix((w, (pairs[:, 0], pairs[:, 1])), shape=(n, n)).tocsr()
    ncomp, labels = connected_components(G, directed=False)
    if ncomp > 1:
        sizes = np.bincount(labels)
        raise DomainError(f"neighbour graph is disconnected: {ncomp} components of sizes {sizes.tolist()}")
    idx = np.arange(n) if sources is None else np.asarray(sources)
    D = dijkstra(G, directed=False, indices=idx)[:, idx]
    D = np.minimum(D, D.T)
    np.fill_diagonal(D, 0.0)
    ids = points if points is not None else tuple(int(i) for i in idx)
    return FiniteMetricSpace.from_matrix(D, ids)


def fit_band_constant(dom: Domain, P, V, oracle: Optional[str] = None,
                      grid_step: float = 2 ** (1 / 64), grid_max: float = 1e6) -> float:
    """Smallest C on the grid {grid_step^k} with B/C <= K <= C B at every sample."""
    oracle = oracle or dom.oracle
    if oracle not in _ORACLES:
        raise DomainError(f"no Kobayashi oracle for domain {dom.name!r}")
    P, V = np.atleast_2d(P), np.atleast_2d(V)
    K = _ORACLES[oracle](P, V)
    B = band_core(dom, P, V)
    nz = B > 0
    need = float(np.max(np.maximum(B[nz] / K[nz], K[nz] / B[nz]))) if np.any(nz) else 1.0
    k = max(0, int(np.ceil(np.log(need) / np.log(grid_step) - 1e-9)))
    C = grid_step ** k
    while C < need * (1 - 1e-12):
        k += 1
        C = grid_step ** k
    if C > grid_max:
        raise DomainError(f"band constant exceeds grid maximum ({need:.3g})")
    assert np.all(B / C <= K * (1 + 1e-12)) and np.all(K <= C * B * (1 + 1e-12))
    return float(C)
