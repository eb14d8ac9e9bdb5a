"""Critical points of the defining function, Morse indices, quadratic normal
forms and component counts of level sets on a grid."""
from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import List, Optional, Sequence

import numpy as np
from scipy import ndimage
from scipy.stats import qmc

from .domain import Domain, DomainError, check_strict_psh

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class CriticalPoint:
    location: np.ndarray
    value: float
    index: int
    hessian_eigenvalues: np.ndarray
    nondegenerate: bool
    grad_norm: float = 0.0

    def to_dict(self):
        return {"location": self.location.tolist(), "value": self.value, "index": self.index,
                "hessian_eigenvalues": self.hessian_eigenvalues.tolist(),
                "nondegenerate": self.nondegenerate, "grad_norm": self.grad_norm}


@dataclass(frozen=True)
class ComponentTrace:
    levels: List[float]
    counts: List[int]
    grid_res: int

    def to_dict(self):
        return {"levels": list(map(float, self.levels)), "counts": list(map(int, self.counts)),
                "grid_res": self.grid_res}


@dataclass(frozen=True)
class NormalFormReport:
    signs: np.ndarray
    radii: np.ndarray
    ratios: np.ndarray
    max_ratio: float
    index: int

    def to_dict(self):
        return {"signs": self.signs.tolist(), "radii": self.radii.tolist(),
                "ratios": self.ratios.tolist(), "max_ratio": self.max_ratio, "index": self.index}


@dataclass(frozen=True)
class ConnectednessVerdict:
    connected: Optional[bool]
    components: int
    trace: ComponentTrace
    refused: bool = False
    note: str = ""
    psh_min_eigenvalue: float = float("nan")

    def to_dict(self):
        return {"connected": self.connected, "components": self.components,
                "trace": self.trace.to_dict(), "refused": self.refused, "note": self.note,
                "psh_min_eigenvalue": self.psh_min_eigenvalue}


def _scales(dom: Domain):
    lo, hi = dom.box
    X = lo + (hi - lo) * qmc.Halton(d=dom.dim, scramble=False).random(64)
    gs = float(np.max(np.linalg.norm(dom.rho.grad(X), axis=-1)))
    hs = float(np.max(np.abs(dom.rho.hess(X))))
    return max(gs, 1e-300), max(hs, 1e-300)


def _classify(dom: Domain, x, degeneracy_tol):
    ev = np.sort(np.linalg.eigvalsh(dom.rho.hess(x)))
    return ev, int(np.sum(ev < -degeneracy_tol)), bool(np.min(np.abs(ev)) > degeneracy_tol)


def find_critical_points(dom: Domain, restarts: int = 64, seed: int = 0, iters: int = 200,
                         critical_tol: Optional[float] = None, degeneracy_tol: Optional[float] = None
                         ) -> List[CriticalPoint]:
    """Multistart damped Newton on grad rho = 0 from scrambled Halton starts in the box.

    Results are deduplicated within 1e-4 of the box diagonal and sorted by value
    descending, so the last entry is the minimum.
    """
    lo, hi = (np.asarray(b, float) for b in dom.box)
    gscale, hscale = _scales(dom)
    critical_tol = 1e-8 * gscale if critical_tol is None else critical_tol
    degeneracy_tol = 1e-6 * hscale if degeneracy_tol is None else degeneracy_tol
    X = lo + (hi - lo) * qmc.Halton(d=dom.dim, scramble=True, seed=seed).random(restarts)
    found = []
    for x in X:
        for _ in range(iters):
            g = dom.rho.grad(x)
            gn = float(np.linalg.norm(g))
            # keep polishing below critical_tol: Newton is only linear at degenerate points
            if gn <= 1e-6 * critical_tol:
                break
            H = dom.rho.hess(x)
            try:
                step = np.linalg.lstsq(H, -g, rcond=None)[0]
            except np.linalg.LinAlgError:
                break
            # damping: halve until |grad| decreases
            lam = 1.0
            while lam > 1e-8:
                y = x + lam * step
                if np.all(y >= lo) and np.all(y <= hi) and np.linalg.norm(dom.rho.grad(y)) < gn:
                    break
                lam *= 0.5
            if lam <= 1e-8:
                break
            x = y
        if np.linalg.norm(dom.rho.grad(x)) <= critical_tol:
            found.append(x)
    if not found:
        log.warning("Newton did not converge from any of %d starts", restarts)
        return []
    radius = 1e-4 * float(np.linalg.norm(hi - lo))
    reps: list = []
    for x in found:
        if all(np.linalg.norm(x - r) > radius for r in reps):
            reps.append(x)
    out = []
    for x in reps:
        ev, k, nd = _classify(dom, x, degeneracy_tol)
        out.append(CriticalPoint(x, float(dom.rho(x)), k, ev, nd, float(np.linalg.norm(dom.rho.grad(x)))))
    out.sort(key=lambda c: (-c.value, tuple(c.location)))
    return out


def index_bound_check(dom: Domain, cp: CriticalPoint, radius: float = 0.25, grid_res: int = 5):
    """Whether index <= n; None (skipped) when the psh certificate near cp fails."""
    lo, hi = (np.asarray(b, float) for b in dom.box)
    region = (np.maximum(cp.location - radius, lo), np.minimum(cp.location + radius, hi))
    cert = check_strict_psh(dom, region, grid_res)
    if not cert.positive:
        log.info("index bound skipped: Levi form not positive near %s (min %.3g)",
                 cp.location.tolist(), cert.min_eigenvalue)
        return None
    return cp.index <= dom.n


def normal_form_fit(dom: Domain, cp: CriticalPoint, radii: Sequence[float] = (0.2, 0.1, 0.05, 0.025),
                    directions: int = 64, seed: int = 0) -> NormalFormReport:
    """Fit rho(cp + Q D^{-1} u) = rho(cp) + sum sign_j u_j^2 and measure the remainder.

    u are Hessian eigen-coordinates scaled by sqrt(|lambda|/2); ratios are the
    max |remainder| / |u|^3 on spheres of decreasing radius.
    """
    if not cp.nondegenerate:
        raise DomainError("normal form needs a nondegenerate critical point")
    ev, Q = np.linalg.eigh(dom.rho.hess(cp.location))
    order = np.argsort(ev)[::-1]
    ev, Q = ev[order], Q[:, order]
    signs = np.sign(ev)
    scale = np.sqrt(np.abs(ev) / 2.0)
    rng = np.random.Generator(np.random.Philox(key=seed))
    U = rng.normal(size=(directions, dom.dim))
    U /= np.linalg.norm(U, axis=1, keepdims=True)
    ratios = []
    for r in radii:
        u = r * U
        X = cp.location + (u / scale) @ Q.T
        model = cp.value + (signs * u ** 2).sum(axis=1)
        ratios.append(float(np.max(np.abs(dom.rho(X) - model)) / r ** 3))
    ratios = np.array(ratios)
    return NormalFormReport(signs, np.asarray(radii, float), ratios, float(ratios.max()),
                            int(np.sum(signs < 0)))


def _grid(dom: Domain, grid_res: int, box=None):
    lo, hi = (np.asarray(b, float) for b in (box or dom.box))
    axes = [np.linspace(a, b, grid_res) for a, b in zip(lo, hi)]
    step = (hi - lo) / (grid_res - 1)
    mesh = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1)
    return mesh, step


def _slab_data(dom: Domain, grid_res: int, box=None):
    mesh, step = _grid(dom, grid_res, box)
    flat = mesh.reshape(-1, dom.dim)
    vals = dom.rho(flat).reshape(mesh.shape[:-1])
    band = 0.5 * (np.abs(dom.rho.grad(flat)) @ step).reshape(mesh.shape[:-1])
    return vals, band


def slab_mask(dom: Domain, t: float, grid_res: int, box=None) -> np.ndarray:
    """Grid cells with |rho + t| within half a cell's rho-variation estimate."""
    vals, band = _slab_data(dom, grid_res, box)
    return np.abs(vals + t) <= band


def component_counts(dom: Domain, levels: Sequence[float], grid_res: int = 24, box=None,
                     critical_values: Sequence[float] = ()) -> ComponentTrace:
    """Connected components (face adjacency) of the slab {rho = -t} for each t."""
    vals, band = _slab_data(dom, grid_res, box)
    cv = np.unique(np.round(np.asarray(critical_values, float), 9))
    if len(cv) > 1 and np.min(np.diff(cv)) < float(np.max(band)):
        log.warning("grid too coarse to separate critical values %s", cv.tolist())
    structure = ndimage.generate_binary_structure(dom.dim, 1)
    counts = []
    for t in levels:
        _, k = ndimage.label(np.abs(vals + t) <= band, structure=structure)
        counts.append(int(k))
    return ComponentTrace(list(map(float, levels)), counts, grid_res)


def boundary_connectedness(dom: Domain, grid_res: int = 24, trace_levels: int = 9,
                           psh_grid: int = 7, cps: Optional[List[CriticalPoint]] = None
                           ) -> ConnectednessVerdict:
    """Count boundary components and replay the level walk from 0 down to the minimum."""
    if not dom.region:
        raise DomainError("boundary connectedness needs a region-type domain with a global rho")
    cert = check_strict_psh(dom, grid_res=psh_grid)
    cps = find_critical_points(dom) if cps is None else cps
    t_min = -min((c.value for c in cps), default=0.0)
    # stop just above the last critical value
    levels = np.linspace(0.0, t_min, trace_levels + 1)[:-1] if t_min > 0 else np.array([0.0])
    if t_min > 0:
        levels = np.append(levels, t_min * (1 - 0.1 / trace_levels))
    trace = component_counts(dom, levels, grid_res, critical_values=[-c.value for c in cps])
    comps = trace.counts[0]
    if not cert.positive:
        return ConnectednessVerdict(None, comps, trace, True,
                                    f"refused: Levi form not positive (min eigenvalue {cert.min_eigenvalue:.4g} "
                                    f"at {np.round(cert.worst_point, 6).tolist()})", cert.min_eigenvalue)
    note = "" if trace.counts[-1] == 1 else "trace does not end at one component"
    return ConnectednessVerdict(comps == 1, comps, trace, False, note, cert.min_eigenvalue)
