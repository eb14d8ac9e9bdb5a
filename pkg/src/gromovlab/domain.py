"""Domains D = {rho < 0} in R^{2n} with an almost complex structure.

Coordinates are ordered (x1, y1, ..., xn, yn) with z_j = x_j + i y_j, and the
standard structure acts as J d/dx_j = d/dy_j, J d/dy_j = -d/dx_j.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np


class DomainError(ValueError):
    pass


class ProjectionError(DomainError):
    pass


def j_standard(n: int) -> np.ndarray:
    J = np.zeros((2 * n, 2 * n))
    for k in range(n):
        J[2 * k + 1, 2 * k] = 1.0
        J[2 * k, 2 * k + 1] = -1.0
    return J


def _central_diff(fn, P, eta):
    """Jacobian of a vector field by central differences; last axis is d/dp_i."""
    P = np.asarray(P, dtype=float)
    dim = P.shape[-1]
    E = (np.eye(dim) * eta).reshape((dim,) + (1,) * (P.ndim - 1) + (dim,))
    # one batched call on all 2 dim shifted copies
    F = np.asarray(fn(np.concatenate([P[None] + E, P[None] - E])))
    D = (F[:dim] - F[dim:]) / (2 * eta)
    return np.moveaxis(D, 0, -1)


class DefiningFunction:
    """Scalar field rho on R^{2n} with gradient and Hessian.

    ``f``, ``grad`` and ``hess`` map arrays of shape (..., 2n) to (...),
    (..., 2n) and (..., 2n, 2n). Missing derivatives fall back to central
    differences with step ``eta``.
    """

    def __init__(self, n: int, f: Callable, grad: Optional[Callable] = None,
                 hess: Optional[Callable] = None, eta: float = 1e-5, expr=None):
        self.n = int(n)
        self._f = f
        self._grad = grad
        self._hess = hess
        self.eta = float(eta)
        self.expr = expr

    @property
    def dim(self) -> int:
        return 2 * self.n

    @property
    def has_analytic_grad(self) -> bool:
        return self._grad is not None

    def __call__(self, P):
        return np.asarray(self._f(np.asarray(P, dtype=float)), dtype=float)

    def grad(self, P):
        P = np.asarray(P, dtype=float)
        if self._grad is not None:
            return np.asarray(self._grad(P), dtype=float)
        return self.fd_grad(P)

    def fd_grad(self, P, eta=None):
        return _central_diff(self.__call__, P, self.eta if eta is None else eta)

    def hess(self, P):
        P = np.asarray(P, dtype=float)
        if self._hess is not None:
            H = np.asarray(self._hess(P), dtype=float)
        else:
            H = _central_diff(self.grad, P, self.eta)
        return 0.5 * (H + np.swapaxes(H, -1, -2))

    @classmethod
    def from_sympy(cls, expr, n: int, eta: float = 1e-5) -> "DefiningFunction":
        """Build from a sympy expression in x1, y1, ..., xn, yn with exact derivatives."""
        import sympy as sp

        syms = coordinate_symbols(n)
        expr = sp.sympify(expr, locals={str(s): s for s in syms})
        grad = [sp.diff(expr, s) for s in syms]
        hess = [[sp.diff(g, s) for s in syms] for g in grad]
        f0 = sp.lambdify(syms, expr, "numpy")
        g0 = sp.lambdify(syms, grad, "numpy")
        h0 = [[sp.lambdify(syms, h, "numpy") for h in row] for row in hess]

        def unpack(P):
            return [P[..., i] for i in range(2 * n)]

        def f(P):
            return np.broadcast_to(f0(*unpack(P)), P.shape[:-1]).astype(float)

        def gr(P):
            args = unpack(P)
            return np.stack([np.broadcast_to(g, P.shape[:-1]) for g in g0(*args)], axis=-1).astype(float)

        def he(P):
            args = unpack(P)
            rows = [np.stack([np.broadcast_to(h(*args), P.shape[:-1]) for h in row], axis=-1) for row in h0]
            return np.stack(rows, axis=-2).astype(float)

        return cls(n, f, gr, he, eta=eta, expr=expr)


def coordinate_symbols(n: int):
    import sympy as sp

    names = []
    for k in range(1, n + 1):
        names += [f"x{k}", f"y{k}"]
    return sp.symbols(names, real=True)


class AlmostComplexStructure:
    """Matrix field J(p) with J(p)^2 = -I.

    In ``audit`` mode every evaluation is checked; otherwise the identity is
    checked once on the sample points passed to :meth:`certify`.
    """

    def __init__(self, n: int, fn: Optional[Callable] = None, audit: bool = False,
                 tol: float = 1e-10, name: str = "standard"):
        self.n = int(n)
        self._fn = fn
        self.audit = audit
        self.tol = tol
        self.name = name
        self._Jst = j_standard(n)

    @property
    def is_standard(self) -> bool:
        return self._fn is None

    def __call__(self, P):
        P = np.asarray(P, dtype=float)
        if self._fn is None:
            return np.broadcast_to(self._Jst, P.shape[:-1] + self._Jst.shape)
        J = np.asarray(self._fn(P), dtype=float)
        if self.audit:
            self._check(J)
        return J

    def _check(self, J):
        err = np.max(np.abs(J @ J + np.eye(2 * self.n)))
        if err > self.tol:
            raise DomainError(f"J^2 != -I (max deviation {err:.3e})")

    def certify(self, P):
        self._check(self(P) if self._fn is None else np.asarray(self._fn(np.asarray(P, float))))

    @classmethod
    def standard(cls, n: int) -> "AlmostComplexStructure":
        return cls(n)

    @classmethod
    def conjugated(cls, n: int, perturb: Callable, audit: bool = False, name="perturbed"):
        """J(p) = A(p) J_st A(p)^{-1} with A = I + perturb(p); J^2 = -I holds exactly."""
        Jst = j_standard(n)
        eye = np.eye(2 * n)

        def fn(P):
            A = eye + np.asarray(perturb(P), dtype=float)
            return A @ Jst @ np.linalg.inv(A)

        return cls(n, fn, audit=audit, name=name)


@dataclass(frozen=True)
class BoundaryPoint:
    location: np.ndarray
    base: np.ndarray
    delta: float


@dataclass(frozen=True)
class PshCertificate:
    min_eigenvalue: float
    worst_point: np.ndarray

    @property
    def positive(self) -> bool:
        return self.min_eigenvalue > 0


@dataclass
class Domain:
    """D = {rho < 0} intersected with an axis-aligned box."""

    rho: DefiningFunction
    J: AlmostComplexStructure
    box: tuple
    collar_eps: float
    witness: np.ndarray
    name: str = "custom"
    oracle: Optional[str] = None
    region: bool = True
    boundary_tol: float = 1e-8
    projection_tol: float = 1e-6
    eta: Optional[float] = None
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        lo, hi = (np.asarray(b, dtype=float) for b in self.box)
        if lo.shape != (self.dim,) or hi.shape != (self.dim,) or np.any(hi <= lo):
            raise DomainError("box must be a pair of length-2n bounds with lo < hi")
        self.box = (lo, hi)
        self.witness = np.asarray(self.witness, dtype=float)
        if not self.in_box(self.witness) or self.rho(self.witness) >= 0:
            raise DomainError("witness point must lie in the box with rho < 0")
        if self.collar_eps <= 0:
            raise DomainError("collar_eps must be positive")
        if self.eta is None:
            self.eta = 1e-4 * float(np.linalg.norm(hi - lo))
        if not self.J.is_standard:
            self.J.certify(self.witness[None, :])

    @property
    def n(self) -> int:
        return self.rho.n

    @property
    def dim(self) -> int:
        return 2 * self.rho.n

    @property
    def diameter(self) -> float:
        return float(np.linalg.norm(self.box[1] - self.box[0]))

    def in_box(self, P) -> np.ndarray:
        P = np.asarray(P, dtype=float)
        lo, hi = self.box
        return np.all((P >= lo - 1e-12) & (P <= hi + 1e-12), axis=-1)

    def contains(self, P) -> np.ndarray:
        return self.in_box(P) & (self.rho(P) < 0)

    def _require_box(self, p):
        if not np.all(self.in_box(p)):
            raise DomainError(f"point {np.asarray(p).tolist()} lies outside the box")

    def check_boundary_nondegenerate(self, samples, tol: float = 1e-8) -> bool:
        g = self.rho.grad(samples)
        return bool(np.all(np.linalg.norm(g, axis=-1) > tol))


# -- forms -----------------------------------------------------------------

def dc_form(dom: Domain, P) -> np.ndarray:
    """Coefficients of the 1-form d^c_J rho = -d rho(J .), i.e. -J^T grad rho."""
    P = np.asarray(P, dtype=float)
    J = dom.J(P)
    g = dom.rho.grad(P)
    return -np.einsum("...ki,...k->...i", J, g)


def d_c_rho(dom: Domain, p, v) -> float:
    p, v = np.asarray(p, float), np.asarray(v, float)
    dom._require_box(p)
    return float(np.dot(dc_form(dom, p), v))


def ddc_matrix(dom: Domain, P) -> np.ndarray:
    """Antisymmetric matrix A of d(d^c_J rho): dd^c(u, w) = u^T A w.

    The exterior derivative is taken by central differences of the 1-form on
    coordinate 2-planes.
    """
    D = _central_diff(lambda Q: dc_form(dom, Q), P, dom.eta)  # D[..., j, i] = d_i alpha_j
    return np.swapaxes(D, -1, -2) - D


def levi_matrix(dom: Domain, P) -> np.ndarray:
    """Symmetric S(p) with L(p, v) = v^T S v."""
    P = np.asarray(P, dtype=float)
    M = ddc_matrix(dom, P) @ dom.J(P)
    return 0.5 * (M + np.swapaxes(M, -1, -2))


def levi_form(dom: Domain, p, v) -> float:
    """L_J rho(p, v) = dd^c_J rho(p)(v, J(p) v)."""
    p, v = np.asarray(p, float), np.asarray(v, float)
    dom._require_box(p)
    A = ddc_matrix(dom, p)
    return float(v @ A @ (dom.J(p) @ v))


def levi_quadratic(dom: Domain, P, V) -> np.ndarray:
    """Batched L(p_i, v_i)."""
    S = levi_matrix(dom, P)
    return np.einsum("...i,...ij,...j->...", V, S, V)


def grid_points(lo, hi, res: int) -> np.ndarray:
    axes = [np.linspace(a, b, res) for a, b in zip(lo, hi)]
    mesh = np.meshgrid(*axes, indexing="ij")
    return np.stack([m.ravel() for m in mesh], axis=-1)


def check_strict_psh(dom: Domain, region=None, grid_res: int = 7) -> PshCertificate:
    """Minimal Levi eigenvalue over a grid; positive certifies strict psh at grid scale."""
    lo, hi = dom.box if region is None else (np.asarray(region[0], float), np.asarray(region[1], float))
    if np.any(lo < dom.box[0] - 1e-12) or np.any(hi > dom.box[1] + 1e-12):
        raise DomainError("region must lie inside the domain box")
    P = grid_points(lo, hi, grid_res)
    best, where = np.inf, None
    for s in range(0, len(P), 4096):
        ev = np.linalg.eigvalsh(levi_matrix(dom, P[s:s + 4096]))[:, 0]
        k = int(np.argmin(ev))
        if ev[k] < best:
            best, where = float(ev[k]), P[s + k].copy()
    return PshCertificate(best, where)


# -- boundary projection ------------------------------------------------------

def ray_to_boundary(dom: Domain, P, U, steps: int = 256, bisect: int = 60) -> np.ndarray:
    """First t > 0 with rho(p + t u) = 0 along unit directions; nan if the ray leaves the box."""
    P = np.atleast_2d(np.asarray(P, float))
    U = np.atleast_2d(np.asarray(U, float))
    U = U / np.linalg.norm(U, axis=-1, keepdims=True)
    lo, hi = dom.box
    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        tb = np.where(U > 0, (hi - P) / U, np.where(U < 0, (lo - P) / U, np.inf))
    tmax = np.min(tb, axis=-1)
    dt = tmax / steps
    t_lo = np.zeros(len(P))
    t_hi = np.full(len(P), np.nan)
    found = np.zeros(len(P), bool)
    for k in range(1, steps + 1):
        t = k * dt
        act = ~found
        if not np.any(act):
            break
        r = dom.rho(P[act] + t[act, None] * U[act])
        hit = r >= 0
        idx = np.nonzero(act)[0]
        t_hi[idx[hit]] = t[idx[hit]]
        found[idx[hit]] = True
        t_lo[idx[~hit]] = t[idx[~hit]]
    ok = found
    a, b = t_lo[ok], t_hi[ok]
    Pk, Uk = P[ok], U[ok]
    for _ in range(bisect):
        m = 0.5 * (a + b)
        r = dom.rho(Pk + m[:, None] * Uk)
        inside = r < 0
        a = np.where(inside, m, a)
        b = np.where(inside, b, m)
    out = np.full(len(P), np.nan)
    out[ok] = 0.5 * (a + b)
    return out


def _closest_point_newton(dom: Domain, P, X0, iters: int = 40):
    """Solve x - p = mu grad rho(x), rho(x) = 0 (first-order optimality) by Newton."""
    X = X0.copy()
    g = dom.rho.grad(X)
    mu = np.einsum("ij,ij->i", X - P, g) / np.maximum(np.einsum("ij,ij->i", g, g), 1e-300)
    dim = P.shape[1]
    eye = np.eye(dim)
    converged = np.zeros(len(P), bool)
    for _ in range(iters):
        g = dom.rho.grad(X)
        H = dom.rho.hess(X)
        r1 = X - P - mu[:, None] * g
        r2 = dom.rho(X)
        K = np.zeros((len(P), dim + 1, dim + 1))
        K[:, :dim, :dim] = eye - mu[:, None, None] * H
        K[:, :dim, dim] = -g
        K[:, dim, :dim] = g
        rhs = -np.concatenate([r1, r2[:, None]], axis=1)
        try:
            step = np.linalg.solve(K, rhs[..., None])[..., 0]
        except np.linalg.LinAlgError:
            step = np.linalg.lstsq(K[0], rhs[0], rcond=None)[0][None]
        # damp steps that would leave the box neighborhood
        scale = np.minimum(1.0, 0.25 * dom.diameter / np.maximum(np.linalg.norm(step[:, :dim], axis=1), 1e-300))
        X = X + scale[:, None] * step[:, :dim]
        mu = mu + scale * step[:, dim]
        small = np.linalg.norm(step[:, :dim], axis=1) < 1e-13 * (1 + np.linalg.norm(X, axis=1))
        converged = small & (np.abs(dom.rho(X)) <= 0.01 * dom.boundary_tol)
        if np.all(converged):
            break
    res = np.abs(dom.rho(X))
    return X, mu, res


def project_many(dom: Domain, P):
    """Nearest boundary points for a batch of interior points.

    Seeds: the gradient ray plus the 2n coordinate rays (+/- e_i), each
    polished by Newton on the optimality system. Among minimisers within
    ``projection_tol`` of the best distance, the lexicographically smallest
    location wins.
    """
    P = np.atleast_2d(np.asarray(P, dtype=float))
    N, dim = P.shape
    if np.any(dom.rho(P) >= 0):
        bad = int(np.argmax(dom.rho(P) >= 0))
        raise DomainError(f"point {P[bad].tolist()} is not interior (rho >= 0)")
    g = dom.rho.grad(P)
    gn = np.linalg.norm(g, axis=1)
    dirs = [np.where(gn[:, None] > 1e-14, g / np.maximum(gn, 1e-300)[:, None], np.eye(dim)[0])]
    for i in range(dim):
        for s in (1.0, -1.0):
            e = np.zeros(dim)
            e[i] = s
            dirs.append(np.broadcast_to(e, (N, dim)))
    S = len(dirs)
    U = np.stack(dirs, axis=1).reshape(-1, dim)
    PP = np.repeat(P, S, axis=0)
    t = ray_to_boundary(dom, PP, U)
    ok = np.isfinite(t)
    X = np.full_like(PP, np.nan)
    X[ok] = PP[ok] + t[ok, None] * U[ok]
    res = np.full(len(PP), np.inf)
    if np.any(ok):
        Xn, mu, r = _closest_point_newton(dom, PP[ok], X[ok])
        good = (r <= dom.boundary_tol) & (mu >= -1e-12) & dom.in_box(Xn)
        # fall back to the raw ray hit if Newton drifted
        raw_r = np.abs(dom.rho(X[ok]))
        Xn = np.where(good[:, None], Xn, X[ok])
        r = np.where(good, r, raw_r)
        X[ok] = Xn
        res[ok] = r
    X = X.reshape(N, S, dim)
    res = res.reshape(N, S)
    dist = np.linalg.norm(X - P[:, None, :], axis=-1)
    dist = np.where(res <= dom.boundary_tol, dist, np.inf)
    best = np.min(dist, axis=1)
    if np.any(~np.isfinite(best)):
        bad = int(np.argmax(~np.isfinite(best)))
        raise ProjectionError(f"no seed reached the boundary from {P[bad].tolist()}")
    locs = np.empty((N, dim))
    for k in range(N):
        cand = np.nonzero(dist[k] <= best[k] + dom.projection_tol)[0]
        pts = X[k, cand]
        order = np.lexsort(np.round(pts, 9).T[::-1])
        locs[k] = pts[order[0]]
    deltas = np.linalg.norm(locs - P, axis=1)
    return locs, deltas


def boundary_project(dom: Domain, p) -> BoundaryPoint:
    p = np.asarray(p, dtype=float)
    dom._require_box(p)
    locs, deltas = project_many(dom, p[None, :])
    return BoundaryPoint(locs[0], p.copy(), float(deltas[0]))


def height(dom: Domain, p) -> float:
    """h(p) = sqrt(delta(p))."""
    return float(np.sqrt(boundary_project(dom, p).delta))


def heights(dom: Domain, P) -> np.ndarray:
    return np.sqrt(project_many(dom, P)[1])


def unit_normal(dom: Domain, X) -> np.ndarray:
    g = dom.rho.grad(X)
    return g / np.linalg.norm(g, axis=-1, keepdims=True)


def project_to_boundary_along_gradient(dom: Domain, X, iters: int = 30) -> np.ndarray:
    """Newton steps x <- x - rho(x) grad/|grad|^2; cheap retraction onto {rho = 0}."""
    X = np.array(X, dtype=float)
    for _ in range(iters):
        r = dom.rho(X)
        if np.all(np.abs(r) <= 0.01 * dom.boundary_tol):
            break
        g = dom.rho.grad(X)
        X = X - (r / np.sum(g * g, axis=-1))[..., None] * g
    return X
