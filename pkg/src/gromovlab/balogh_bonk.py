"""Height-based metric g, the collar-geodesic metric d, l_g lengths and the
empirical checks built on them.

With h = sqrt(delta) and pi the nearest-point projection to the boundary,

    g(p, q) = 2 log((d_H(pi p, pi q) + max(h(p), h(q))) / sqrt(h(p) h(q))).

Inside the collar N_eps = {delta <= eps}, d is the infimum of l_g over
curves in the collar; outside it is glued to the Euclidean chart distance
along normal fibres.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import List, Optional, Sequence

import numpy as np
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import connected_components, dijkstra

from .carnot import CCOptions, cc_distance, cc_distance_matrix, planar_gauge
from .curves import PolylineCurve
from .domain import Domain, DomainError, boundary_project, project_many, unit_normal
from .kobayashi import KobayashiEstimator, kob_length
from .metric_core import DeltaReport, FiniteMetricSpace, delta_four_point


@dataclass(frozen=True)
class CollarPoint:
    base: np.ndarray
    boundary: np.ndarray
    h: float
    in_collar: bool


@dataclass(frozen=True)
class GMetricValue:
    value: float
    dH_term: float
    height_term: float
    h_p: float
    h_q: float

    def recompute(self) -> float:
        return g_formula(self.dH_term, self.h_p, self.h_q)


def collar_point(dom: Domain, p) -> CollarPoint:
    bp = boundary_project(dom, p)
    return CollarPoint(bp.base, bp.location, float(np.sqrt(bp.delta)), bool(bp.delta <= dom.collar_eps))


def g_formula(dH, hp, hq):
    """Vectorised g from d_H and the two heights."""
    dH, hp, hq = np.asarray(dH, float), np.asarray(hp, float), np.asarray(hq, float)
    if np.any(hp <= 0) or np.any(hq <= 0):
        raise DomainError("g needs interior points (height > 0)")
    out = 2.0 * (np.log(dH + np.maximum(hp, hq)) - 0.5 * (np.log(hp) + np.log(hq)))
    return float(out) if out.ndim == 0 else out


def boundary_distances(dom: Domain, A, B=None, opts: Optional[CCOptions] = None) -> np.ndarray:
    """d_H between boundary points: the planar gauge for n = 1, else the CC solver."""
    A = np.atleast_2d(np.asarray(A, float))
    sym = B is None
    B = A if sym else np.atleast_2d(np.asarray(B, float))
    if dom.n == 1:
        D = planar_gauge(dom, A, B)
    elif sym:
        D = cc_distance_matrix(dom, A, opts).dist.copy()
    else:
        D = np.array([[0.0 if np.array_equal(a, b) else cc_distance(dom, a, b, opts).value
                       for b in B] for a in A])
    if sym:
        D = np.minimum(D, D.T)
        np.fill_diagonal(D, 0.0)
    return D


def g_metric(dom: Domain, p, q, dH: Optional[float] = None,
             opts: Optional[CCOptions] = None) -> GMetricValue:
    p, q = np.asarray(p, float), np.asarray(q, float)
    cp, cq = collar_point(dom, p), collar_point(dom, q)
    if dH is None:
        same = np.linalg.norm(cp.boundary - cq.boundary) <= dom.projection_tol
        dH = 0.0 if same else float(boundary_distances(dom, cp.boundary, cq.boundary, opts)[0, 0])
    if dH < 0:
        raise ValueError("d_H must be nonnegative")
    hmax = max(cp.h, cq.h)
    return GMetricValue(g_formula(dH, cp.h, cq.h), float(dH), hmax, cp.h, cq.h)


def g_matrix(dom: Domain, P, opts: Optional[CCOptions] = None, points=None) -> FiniteMetricSpace:
    P = np.atleast_2d(np.asarray(P, float))
    locs, deltas = project_many(dom, P)
    h = np.sqrt(deltas)
    DH = boundary_distances(dom, locs, opts=opts)
    G = g_formula(DH, h[:, None], h[None, :])
    G = 0.5 * (G + G.T)
    np.fill_diagonal(G, 0.0)
    return FiniteMetricSpace.from_matrix(G, points if points is not None else tuple(range(len(P))))


def lift_to_height(dom: Domain, p, target_h: float, tol: float = 1e-7) -> np.ndarray:
    """Point on the inward normal fibre through pi(p) at height target_h."""
    if target_h <= 0:
        raise DomainError("target height must be positive")
    p = np.asarray(p, float)
    # a boundary point is its own projection
    base = p if abs(float(dom.rho(p))) <= dom.boundary_tol else boundary_project(dom, p).location
    s = float(target_h) ** 2
    x = base - s * unit_normal(dom, base)
    if not dom.contains(x):
        raise DomainError(f"height {target_h:g} leaves the domain along the fibre of {base.tolist()}")
    back = boundary_project(dom, x)
    if abs(back.delta - s) > tol * max(1.0, s) + dom.projection_tol:
        raise DomainError(f"height {target_h:g} is beyond the cut locus of the fibre "
                          f"(delta there is {back.delta:.6g}, wanted {s:.6g})")
    return x


# -- l_g -----------------------------------------------------------------------

@dataclass(frozen=True)
class LgLength:
    value: float
    trace: List[tuple]


def l_g_length(dom: Domain, curve: PolylineCurve, partitions: int = 256,
               opts: Optional[CCOptions] = None) -> LgLength:
    """Partition sums of g at dyadic refinements; the largest approximates the sup."""
    V = curve.vertices
    t = curve.params
    locs, deltas = project_many(dom, V)
    if np.any(deltas > dom.collar_eps * (1 + 1e-9)):
        k = int(np.argmax(deltas > dom.collar_eps * (1 + 1e-9)))
        raise DomainError(f"curve leaves the collar at vertex {k}")
    trace = []
    k = 1
    while k <= max(1, partitions):
        s = np.linspace(t[0], t[-1], k + 1)
        X = np.stack([np.interp(s, t, V[:, i]) for i in range(V.shape[1])], axis=1)
        L, D = project_many(dom, X)
        h = np.sqrt(D)
        dH = np.array([boundary_distances(dom, L[i], L[i + 1], opts)[0, 0]
                       if np.linalg.norm(L[i] - L[i + 1]) > dom.projection_tol else 0.0
                       for i in range(k)]) if dom.n > 1 else \
            np.diag(planar_gauge(dom, L[:-1], L[1:])) if k > 0 else np.zeros(0)
        total = float(np.sum(g_formula(dH, h[:-1], h[1:])))
        trace.append((k, total))
        k *= 2
    return LgLength(max(v for _, v in trace), trace)


# -- d ---------------------------------------------------------------------------

@dataclass
class CollarGraph:
    """Sample graph realising inf l_g over curves inside the collar.

    Nodes are the query points, a ladder on the normal fibre of each query
    (heights growing by ``ladder_ratio`` up to sqrt(eps)) and ``ring``
    quasi-uniform boundary samples lifted to ``levels`` heights below
    sqrt(eps). Each node is joined to its ``k_neighbors`` nearest nodes in g,
    ladder nodes also to their nearest ring nodes, and an edge weighs g of its endpoints, so a path length is a partition sum
    of l_g along a curve through its nodes. ``ring`` and ``levels`` are the
    refinement parameters.
    """
    dom: Domain
    nodes: np.ndarray
    locs: np.ndarray
    h: np.ndarray
    dist: np.ndarray = field(repr=False, default=None)
    query_index: np.ndarray = None

    @classmethod
    def build(cls, dom: Domain, queries, ring: int = 256, levels: int = 8, k_neighbors: int = 16,
              ladder_ratio: float = 2 ** 0.5, opts: Optional[CCOptions] = None):
        Q = np.atleast_2d(np.asarray(queries, float))
        qlocs, qdel = project_many(dom, Q)
        qh = np.sqrt(qdel)
        top = np.sqrt(dom.collar_eps)
        if np.any(qh > top * (1 + 1e-9)):
            raise DomainError("collar graph queries must lie in the collar")
        normals_q = unit_normal(dom, qlocs)
        nodes, locs, hs = [Q], [qlocs], [qh]
        fI, fJ = [], []
        start = len(Q)
        for i, (x, n, h) in enumerate(zip(qlocs, normals_q, qh)):
            lv = h * ladder_ratio ** np.arange(1, 64)
            lv = np.append(lv[lv < top * (1 - 1e-9)], top) if h < top * (1 - 1e-9) else np.zeros(0)
            # consecutive fibre nodes are always joined so same-fibre pairs are exact
            chain = [i] + list(range(start, start + len(lv)))
            fI += chain[:-1]
            fJ += chain[1:]
            start += len(lv)
            nodes.append(x - (lv ** 2)[:, None] * n)
            locs.append(np.repeat(x[None], len(lv), axis=0))
            hs.append(lv)
        if ring > 0:
            B = _boundary_ring(dom, ring)
            nb = unit_normal(dom, B)
            for j in range(levels):
                hj = top / ladder_ratio ** j
                nodes.append(B - hj ** 2 * nb)
                locs.append(B)
                hs.append(np.full(len(B), hj))
        X = np.vstack(nodes)
        L = np.vstack(locs)
        H = np.concatenate(hs)
        # d_H once per distinct boundary location
        uniq, inv = np.unique(np.round(L, 12), axis=0, return_inverse=True)
        inv = inv.ravel()
        DHu = boundary_distances(dom, uniq, opts=opts)
        G = g_formula(DHu[np.ix_(inv, inv)], H[:, None], H[None, :])
        np.fill_diagonal(G, np.inf)
        M = len(X)
        k = min(k_neighbors, M - 1)
        nbr = np.argpartition(G, k - 1, axis=1)[:, :k]
        I = np.repeat(np.arange(M), k)
        J = nbr.ravel()
        nq = start  # queries and ladders come first
        if M > nq:
            # ladders would otherwise only see themselves; attach each to its nearest ring nodes
            kr = min(k, M - nq)
            rn = nq + np.argpartition(G[:nq, nq:], kr - 1, axis=1)[:, :kr]
            I = np.concatenate([I, np.repeat(np.arange(nq), kr)])
            J = np.concatenate([J, rn.ravel()])
        I = np.concatenate([I, fI]).astype(int)
        J = np.concatenate([J, fJ]).astype(int)
        W = np.maximum(G[I, J], 1e-300)
        A = coo_matrix((W, (I, J)), shape=(M, M)).tocsr()
        A = A.maximum(A.T)
        ncomp, labels = connected_components(A, directed=False)
        if len(np.unique(labels[: len(Q)])) > 1:
            raise DomainError(f"collar graph is disconnected ({ncomp} components); raise k_neighbors or ring")
        D = dijkstra(A, directed=False, indices=np.arange(len(Q)))[:, : len(Q)]
        D = np.minimum(D, D.T)
        np.fill_diagonal(D, 0.0)
        return cls(dom, X, L, H, D, np.arange(len(Q)))


def _boundary_ring(dom: Domain, count: int) -> np.ndarray:
    """Quasi-uniform boundary samples: retracted sunflower / Fibonacci directions."""
    from .domain import ray_to_boundary
    dim = dom.dim
    if dim == 2:
        th = 2 * np.pi * (np.arange(count) + 0.5) / count
        U = np.stack([np.cos(th), np.sin(th)], axis=1)
    else:
        from scipy.stats import qmc
        Z = qmc.Halton(d=dim, scramble=True, seed=0).random(count)
        from scipy.special import ndtri
        U = ndtri(np.clip(Z, 1e-12, 1 - 1e-12))
    U = U / np.linalg.norm(U, axis=1, keepdims=True)
    t = ray_to_boundary(dom, np.broadcast_to(dom.witness, U.shape), U)
    ok = np.isfinite(t)
    return dom.witness + t[ok, None] * U[ok]


def d_matrix(dom: Domain, P, ring: int = 256, opts: Optional[CCOptions] = None,
             points=None, **graph_kw) -> FiniteMetricSpace:
    """The glued metric d on a sample, all four cases at once."""
    P = np.atleast_2d(np.asarray(P, float))
    locs, deltas = project_many(dom, P)
    inside = deltas <= dom.collar_eps
    top = np.sqrt(dom.collar_eps)
    # collar representative: the point itself, or its lift to the top of the collar
    R = P.copy()
    extra = np.zeros(len(P))
    for i in np.nonzero(~inside)[0]:
        R[i] = lift_to_height(dom, P[i], top)
        extra[i] = float(np.linalg.norm(P[i] - R[i]))
    graph = CollarGraph.build(dom, R, ring=ring, opts=opts, **graph_kw)
    D = graph.dist + extra[:, None] + extra[None, :]
    # case (iii): both outside on one fibre
    out = np.nonzero(~inside)[0]
    for a in out:
        for b in out:
            if a < b and np.linalg.norm(locs[a] - locs[b]) <= dom.projection_tol:
                D[a, b] = D[b, a] = float(np.linalg.norm(P[a] - P[b]))
    np.fill_diagonal(D, 0.0)
    return FiniteMetricSpace.from_matrix(D, points if points is not None else tuple(range(len(P))))


def d_metric(dom: Domain, p, q, ring: int = 256, opts: Optional[CCOptions] = None, **graph_kw) -> float:
    return float(d_matrix(dom, np.vstack([p, q]), ring=ring, opts=opts, **graph_kw).dist[0, 1])


# -- empirical checks -------------------------------------------------------------

@dataclass(frozen=True)
class LengthEstimateReport:
    C1: float
    C2: float
    violations: int
    fitted_C1: float
    fitted_C2: float
    n_curves: int
    n_normal: int
    log_ratio: np.ndarray = field(repr=False)
    l_K: np.ndarray = field(repr=False)

    def to_dict(self):
        return {"C1": self.C1, "C2": self.C2, "violations": self.violations,
                "fitted_C1": self.fitted_C1, "fitted_C2": self.fitted_C2,
                "n_curves": self.n_curves, "n_normal": self.n_normal}


def _needed_C2(r, lk, normal, C1):
    lower = np.max(r / C1 - lk) if len(r) else 0.0
    upper = np.max(lk[normal] - C1 * r[normal]) if np.any(normal) else 0.0
    return float(max(0.0, lower, upper))


def verify_length_estimates(dom: Domain, curves: Sequence[PolylineCurve], normal: Sequence[bool],
                            C1: float = 4.0, C2: float = 1.0, est: Optional[KobayashiEstimator] = None,
                            grid_step: float = 2 ** (1 / 16), grid_max: float = 64.0) -> LengthEstimateReport:
    """Check (1/C1)|log(h1/h0)| - C2 <= l_K for every curve and
    l_K <= C1 |log(h1/h0)| + C2 for normal curves.

    The fitted pair minimises C1 + C2 over the geometric C1 grid, each C1
    taking its smallest feasible C2.
    """
    est = est or KobayashiEstimator.for_domain(dom)
    normal = np.asarray(normal, bool)
    ends = np.array([[c.vertices[0], c.vertices[-1]] for c in curves])
    _, d0 = project_many(dom, ends[:, 0])
    _, d1 = project_many(dom, ends[:, 1])
    for c in curves:
        if np.any(project_many(dom, c.vertices)[1] > dom.collar_eps * (1 + 1e-9)):
            raise DomainError("length estimates are stated for curves inside the collar")
    r = np.abs(0.5 * np.log(d1 / d0))  # |log(h1 / h0)|
    lk = np.array([kob_length(dom, c, est) for c in curves])
    viol = int(np.sum(r / C1 - C2 > lk + 1e-12) + np.sum(lk[normal] > C1 * r[normal] + C2 + 1e-12))
    best = None
    k = 0
    while True:
        c1 = grid_step ** k
        if c1 > grid_max:
            break
        c2 = _needed_C2(r, lk, normal, c1)
        if best is None or c1 + c2 < best[0] + best[1] - 1e-12:
            best = (c1, c2)
        k += 1
    return LengthEstimateReport(C1, C2, viol, best[0], best[1], len(curves), int(normal.sum()), r, lk)


def collar_test_curves(dom: Domain, count: int, seed: int = 0, h_min: float = 0.03, pieces: int = 64):
    """Normal segments and fixed-height horizontal arcs inside the collar of a planar domain.

    Returns (curves, is_normal). Horizontal arcs follow the boundary at
    constant height, so their log-height ratio is zero.
    """
    if dom.n != 1:
        raise DomainError("collar_test_curves builds planar curves; use lifted boundary curves for n > 1")
    rng = np.random.Generator(np.random.Philox(key=seed))
    top = np.sqrt(dom.collar_eps)
    B = _boundary_ring(dom, 4096)
    nb = unit_normal(dom, B)
    curves, normal = [], []
    for _ in range(count):
        i = int(rng.integers(len(B)))
        h0, h1 = np.exp(rng.uniform(np.log(h_min), np.log(top), size=2))
        s = np.linspace(h0, h1, pieces + 1) ** 2
        curves.append(PolylineCurve(B[i] - s[:, None] * nb[i]))
        normal.append(True)
    for _ in range(count):
        i = int(rng.integers(len(B)))
        span = int(rng.integers(8, 512))
        h = float(np.exp(rng.uniform(np.log(h_min), np.log(top))))
        idx = (i + np.arange(span + 1)) % len(B)
        curves.append(PolylineCurve(B[idx] - h * h * nb[idx]))
        normal.append(False)
    return curves, np.array(normal)


def verify_gromov_inequality_g(dom: Domain, sample, opts: Optional[CCOptions] = None,
                               **delta_kw) -> DeltaReport:
    """Empirical four-point delta of g on a sample (``delta_kw`` go to delta_four_point)."""
    if len(sample) < 4:
        raise ValueError("need at least 4 samples")
    return delta_four_point(g_matrix(dom, sample, opts), **delta_kw)
