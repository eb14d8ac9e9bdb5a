"""Boundary sub-Riemannian geometry: complex tangent spaces, horizontal
polylines, Levi length and the Carnot-Caratheodory distance d_H.

Horizontality is imposed by a penalty rather than by a parameterization of
the contact distribution, so the solver works for any (rho, J).
"""
from __future__ import annotations

import csv
import io
from dataclasses import dataclass
from typing import List, Optional, Sequence, Tuple

import numpy as np
from scipy.optimize import minimize

from .domain import Domain, DomainError, dc_form, levi_matrix, ray_to_boundary
from .metric_core import FiniteMetricSpace

HORIZ_TOL = 1e-3


class CCSolverError(DomainError):
    """No curve reached the horizontality / boundary tolerances."""


@dataclass(frozen=True)
class HorizontalCurve:
    vertices: np.ndarray
    horizontality_residual: float
    boundary_residual: float = 0.0

    def __len__(self):
        return len(self.vertices)

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow([f"p{i}" for i in range(self.vertices.shape[1])])
        for v in self.vertices:
            w.writerow([format(float(x), ".17g") for x in v])
        return buf.getvalue()

    def to_dict(self):
        return {"vertices": self.vertices.tolist(),
                "horizontality_residual": self.horizontality_residual,
                "boundary_residual": self.boundary_residual}


@dataclass(frozen=True)
class CCDistanceResult:
    value: float
    curve: HorizontalCurve
    refinement_trace: List[Tuple[int, float]]
    method: str = "penalty"

    def to_dict(self):
        return {"value": self.value, "method": self.method,
                "refinement_trace": [[int(k), float(v)] for k, v in self.refinement_trace],
                "curve": self.curve.to_dict()}


@dataclass(frozen=True)
class CCOptions:
    """Solver settings. ``vertices`` lists the refinement ladder."""
    vertices: Tuple[int, ...] = (9, 17, 33)
    penalty_weight: float = 1000.0
    restarts: int = 3
    seed: int = 0
    horiz_tol: float = HORIZ_TOL
    growth: float = 4.0
    max_continuation: int = 8
    maxiter: int = 150
    jitter: float = 0.35
    ftol: float = 1e-11
    gtol: float = 1e-7
    solver_tol: float = 1e-3  # relative accuracy claimed for returned values


# -- complex tangent ---------------------------------------------------------

def _normal_frame(dom: Domain, P) -> np.ndarray:
    """Orthogonal projector N onto span{grad rho, J^T grad rho}, batched."""
    P = np.asarray(P, float)
    g = dom.rho.grad(P)
    gn = np.linalg.norm(g, axis=-1, keepdims=True)
    if np.any(gn < 1e-10):
        raise DomainError("grad rho vanishes: boundary is degenerate here")
    e1 = g / gn
    t = -dc_form(dom, P)  # J^T grad rho
    t = t - np.sum(t * e1, axis=-1, keepdims=True) * e1
    e2 = t / np.linalg.norm(t, axis=-1, keepdims=True)
    return e1[..., :, None] * e1[..., None, :] + e2[..., :, None] * e2[..., None, :]


def complex_tangent_projector(dom: Domain, q) -> np.ndarray:
    """Orthogonal projector onto T^J = ker d rho  cap  ker d^c rho at a boundary point."""
    q = np.asarray(q, float)
    if dom.n < 2:
        raise DomainError("complex tangent of a planar boundary is zero-dimensional")
    if abs(float(dom.rho(q))) > dom.boundary_tol:
        raise DomainError(f"point {q.tolist()} is not on the boundary (|rho| = {abs(float(dom.rho(q))):.3g})")
    return np.eye(dom.dim) - _normal_frame(dom, q)


# -- lengths -----------------------------------------------------------------

def _residuals(dom: Domain, V) -> np.ndarray:
    """Per-segment |N step| / |step| at the chord midpoints."""
    V = np.asarray(V, float)
    D = V[1:] - V[:-1]
    nz = np.linalg.norm(D, axis=1) > 0
    out = np.zeros(len(D))
    if np.any(nz):
        M = 0.5 * (V[1:] + V[:-1])[nz]
        N = _normal_frame(dom, M)
        ND = np.einsum("kij,kj->ki", N, D[nz])
        out[nz] = np.linalg.norm(ND, axis=1) / np.linalg.norm(D[nz], axis=1)
    return out


def make_curve(dom: Domain, vertices) -> HorizontalCurve:
    V = np.atleast_2d(np.asarray(vertices, float))
    res = _residuals(dom, V)
    return HorizontalCurve(V, float(res.max(initial=0.0)), float(np.max(np.abs(dom.rho(V)))))


def levi_length(dom: Domain, curve: HorizontalCurve, horiz_tol: float = HORIZ_TOL) -> float:
    """Composite-midpoint quadrature of the integral of L(gamma, gamma')^(1/2)."""
    V = curve.vertices
    if len(V) < 2:
        return 0.0
    if curve.boundary_residual > max(dom.boundary_tol, 1e-6):
        raise DomainError(f"curve vertices leave the boundary (|rho| up to {curve.boundary_residual:.3g})")
    res = _residuals(dom, V)
    if res.max() > horiz_tol:
        k = int(np.argmax(res))
        raise DomainError(f"curve is not horizontal: segment {k} residual {res[k]:.3g} > {horiz_tol:g}")
    D = V[1:] - V[:-1]
    nz = np.linalg.norm(D, axis=1) > 0
    if not np.any(nz):
        return 0.0
    M = 0.5 * (V[1:] + V[:-1])[nz]
    q = np.einsum("ki,kij,kj->k", D[nz], levi_matrix(dom, M), D[nz])
    return float(np.sum(np.sqrt(np.maximum(q, 0.0))))


# -- penalty functional ------------------------------------------------------

def _seg_terms(S, N, D, w):
    """Segment energy L(P step) + w |N step|^2 and its step-gradient."""
    ND = np.einsum("...ij,...j->...i", N, D)
    PD = D - ND
    SPD = np.einsum("...ij,...j->...i", S, PD)
    f = np.sum(PD * SPD, axis=-1) + w * np.sum(ND * ND, axis=-1)
    PSPD = SPD - np.einsum("...ij,...j->...i", N, SPD)
    return f, 2 * (PSPD + w * ND)


class _Functional:
    """Discrete energy (m - 1) sum_k [L(P D_k) + w |N D_k|^2] + boundary penalty.

    Energy rather than length: it is smooth, it fixes the parameterization
    (minimizers are equally spaced) and, by Cauchy-Schwarz, its minimum is
    the squared minimal length.
    """

    def __init__(self, dom: Domain, a, b, nvert: int, w: float, scale: float):
        self.dom, self.a, self.b = dom, a, b
        self.nv, self.w = nvert, w
        self.dim = dom.dim
        self.h = 1e-5 * dom.diameter
        self.cg2 = float(np.sum(dom.rho.grad(a) ** 2))
        self.wb = w * (nvert - 1) ** 2 / self.cg2

    def full(self, x):
        return np.vstack([self.a, x.reshape(self.nv - 2, self.dim), self.b])

    def __call__(self, x):
        dom, d, w = self.dom, self.dim, self.w
        m = self.nv - 1
        V = self.full(x)
        D = V[1:] - V[:-1]
        M = 0.5 * (V[1:] + V[:-1])
        E = np.eye(d) * self.h
        Mall = np.concatenate([M[None], M[None] + E[:, None, :], M[None] - E[:, None, :]])
        flat = Mall.reshape(-1, d)
        S = levi_matrix(dom, flat).reshape(Mall.shape + (d,))
        N = _normal_frame(dom, flat).reshape(Mall.shape + (d,))
        f, gD = _seg_terms(S[0], N[0], D, w)
        fp, _ = _seg_terms(S[1:d + 1], N[1:d + 1], D[None], w)
        fm, _ = _seg_terms(S[d + 1:], N[d + 1:], D[None], w)
        gM = ((fp - fm) / (2 * self.h)).T
        G = np.zeros_like(V)
        G[:-1] += 0.5 * gM - gD
        G[1:] += 0.5 * gM + gD
        # vertices stay near {rho = 0}: squared distance proxy rho^2 / |grad rho|^2
        inner = V[1:-1]
        r = dom.rho(inner)
        F = float(m * np.sum(f) + self.wb * np.sum(r ** 2))
        G *= m
        G[1:-1] += 2 * self.wb * r[:, None] * dom.rho.grad(inner)
        return F, G[1:-1].ravel()


def _retract(dom: Domain, V) -> np.ndarray:
    """Push points to the boundary along rays from the witness point."""
    U = V - dom.witness
    t = ray_to_boundary(dom, np.broadcast_to(dom.witness, V.shape), U)
    if np.any(~np.isfinite(t)):
        raise DomainError("boundary retraction failed: ray from the witness leaves the box")
    return dom.witness + t[:, None] * U / np.linalg.norm(U, axis=1, keepdims=True)


def _initial_curves(dom: Domain, a, b, nvert: int, opts: CCOptions) -> List[np.ndarray]:
    """Great-circle-like interpolation about the witness, plus jittered restarts."""
    ua, ub = a - dom.witness, b - dom.witness
    t = np.linspace(0.0, 1.0, nvert)
    base = (1 - t)[:, None] * ua + t[:, None] * ub
    scale = max(np.linalg.norm(ua), np.linalg.norm(ub))
    # a straight chord through the witness cannot be retracted: bend it
    rng = np.random.Generator(np.random.Philox(key=opts.seed))
    dirs = rng.standard_normal((opts.restarts + 1, dom.dim))
    curves = []
    for k in range(opts.restarts + 1):
        amp = (1e-3 if k == 0 else opts.jitter) * scale
        bump = np.sin(np.pi * t)[:, None] * dirs[k] / np.linalg.norm(dirs[k]) * amp
        P = dom.witness + base + bump
        P[0], P[-1] = a, b
        V = _retract(dom, P[1:-1]) if nvert > 2 else np.empty((0, dom.dim))
        curves.append(np.vstack([a, V, b]))
    return curves


def _refine(dom: Domain, V) -> np.ndarray:
    mids = _retract(dom, 0.5 * (V[1:] + V[:-1]))
    out = np.empty((2 * len(V) - 1, V.shape[1]))
    out[0::2], out[1::2] = V, mids
    return out


def _solve(dom: Domain, V0, w0: float, opts: CCOptions, scale: float, tol: float):
    """Penalty continuation from V0 until the residual is <= tol; returns (vertices, residual, weight)."""
    a, b = V0[0], V0[-1]
    x = V0[1:-1].ravel().copy()
    w = w0
    res = np.inf
    for _ in range(opts.max_continuation):
        fun = _Functional(dom, a, b, len(V0), w, scale)
        out = minimize(fun, x, jac=True, method="L-BFGS-B",
                       options={"maxiter": opts.maxiter, "ftol": opts.ftol, "gtol": opts.gtol})
        x = out.x
        V = fun.full(x)
        res = float(_residuals(dom, V).max())
        if res <= tol:
            break
        w *= opts.growth
    return V, res, w


def _flux_table(dom: Domain, samples: int = 4096):
    """Cumulative int d^c rho along the boundary curve of a planar domain,
    tabulated against the angle about the witness (cached on the domain)."""
    key = ("flux_table", samples)
    if key not in dom.meta:
        th = np.linspace(-np.pi, np.pi, samples + 1)
        U = np.stack([np.cos(th), np.sin(th)], axis=1)
        t = ray_to_boundary(dom, np.broadcast_to(dom.witness, U.shape), U)
        if np.any(~np.isfinite(t)):
            raise DomainError("boundary is not star-shaped about the witness inside the box")
        V = dom.witness + t[:, None] * U
        M, D = 0.5 * (V[1:] + V[:-1]), V[1:] - V[:-1]
        flux = np.concatenate([[0.0], np.cumsum(np.sum(dc_form(dom, M) * D, axis=1))])
        dom.meta[key] = (th, flux, V)
    return dom.meta[key]


def planar_gauge(dom: Domain, A, B) -> np.ndarray:
    """n = 1 substitute for d_H (T^J is zero, so horizontal curves are constant).

    sqrt(4 pi |int d^c rho|) along the shorter boundary arc; on the unit
    circle this is sqrt(8 pi dtheta), the small-phase limit of the vertical
    distance on the three-sphere. Returns the gauge for every pair (A[i], B[j]).
    """
    th, flux, _ = _flux_table(dom)
    total = abs(flux[-1])

    def phi(X):
        U = np.atleast_2d(np.asarray(X, float)) - dom.witness
        return np.interp(np.arctan2(U[:, 1], U[:, 0]), th, flux)

    F = np.abs(phi(A)[:, None] - phi(B)[None, :])
    F = np.minimum(F, total - F)
    return np.sqrt(4 * np.pi * np.maximum(F, 0.0))


def _planar_result(dom: Domain, a, b, samples: int = 256) -> CCDistanceResult:
    val = float(planar_gauge(dom, a, b)[0, 0])
    ta, tb = (float(np.arctan2(p[1] - dom.witness[1], p[0] - dom.witness[0])) for p in (a, b))
    dt = (tb - ta + np.pi) % (2 * np.pi) - np.pi
    th = ta + dt * np.linspace(0.0, 1.0, samples + 1)
    U = np.stack([np.cos(th), np.sin(th)], axis=1)
    V = dom.witness + ray_to_boundary(dom, np.broadcast_to(dom.witness, U.shape), U)[:, None] * U
    V[0], V[-1] = a, b
    return CCDistanceResult(val, HorizontalCurve(V, 0.0), [(len(V), val)], "planar_gauge")


def cc_distance(dom: Domain, a, b, opts: Optional[CCOptions] = None) -> CCDistanceResult:
    """d_H(a, b): infimal Levi length over horizontal polylines joining a and b.

    Deterministic multistart penalty descent at each vertex count of the
    refinement ladder; the best curve of one rung seeds the next.
    """
    opts = opts or CCOptions()
    a, b = np.asarray(a, float), np.asarray(b, float)
    for p in (a, b):
        if abs(float(dom.rho(p))) > max(dom.boundary_tol, 1e-6):
            raise DomainError(f"endpoint {p.tolist()} is not on the boundary")
    if np.array_equal(a, b):
        return CCDistanceResult(0.0, HorizontalCurve(np.vstack([a, b]), 0.0), [(2, 0.0)])
    if dom.n == 1:
        return _planar_result(dom, a, b)
    scale = float(np.linalg.norm(b - a))
    trace = []
    best = None
    w = opts.penalty_weight
    for level, nv in enumerate(opts.vertices):
        if level == 0:
            starts = _initial_curves(dom, a, b, nv, opts)
        else:
            starts = [_refine(dom, best[0])]
            while len(starts[0]) < nv:
                starts = [_refine(dom, starts[0])]
        # chord residuals of a smooth horizontal curve scale like (segment length)^2,
        # so only the last rung has to meet horiz_tol
        tol = opts.horiz_tol * ((opts.vertices[-1] - 1) / (nv - 1)) ** 2
        cands = []
        for V0 in starts:
            V, res, wk = _solve(dom, V0, w, opts, scale, tol)
            if res > tol:
                continue
            V = _retract(dom, V[1:-1]) if len(V) > 2 else V[1:-1]
            V = np.vstack([a, V, b])
            curve = make_curve(dom, V)
            if curve.horizontality_residual > tol * 1.5:
                continue
            L = levi_length(dom, curve, horiz_tol=tol * 1.5)
            cands.append((L, tuple(np.round(V, 12).ravel()), curve, wk))
        if not cands:
            raise CCSolverError(
                f"no horizontal curve within tolerance {tol:.3g} at {nv} vertices between "
                f"{a.tolist()} and {b.tolist()} (disconnected boundary or tolerance too tight?)")
        cands.sort(key=lambda c: (c[0], c[1]))
        L, _, curve, wk = cands[0]
        trace.append((len(curve), L))
        best = (curve.vertices, curve, L)
        w = wk
    _, curve, L = best
    return CCDistanceResult(float(L), curve, trace)


def cc_distance_matrix(dom: Domain, boundary_samples: Sequence, opts: Optional[CCOptions] = None,
                       points=None) -> FiniteMetricSpace:
    """Pairwise d_H with one shared options object (and therefore seeds)."""
    X = np.asarray(boundary_samples, float)
    n = len(X)
    ids = points if points is not None else tuple(range(n))
    if dom.n == 1:
        D = planar_gauge(dom, X, X)
        D = np.minimum(D, D.T)
        np.fill_diagonal(D, 0.0)
        return FiniteMetricSpace.from_matrix(D, ids)
    D = np.zeros((n, n))
    for i in range(n):
        for j in range(i + 1, n):
            if not np.array_equal(X[i], X[j]):
                D[i, j] = D[j, i] = cc_distance(dom, X[i], X[j], opts).value
    return FiniteMetricSpace.from_matrix(D, ids)
