"""Module pipelines behind the CLI subcommands.

Each pipeline takes a normalized config and a domain and returns a
``Section``: named checks (value, gate, pass/fail; gate-less checks are
informational), a JSON-ready result dict and CSV artifacts.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Dict, List, Optional

import numpy as np

from .config import ExperimentConfig
from .domain import Domain, check_strict_psh, ray_to_boundary


@dataclass
class Check:
    name: str
    claim: str
    value: object
    gate: str = ""
    passed: Optional[bool] = None

    def to_dict(self):
        return {"name": self.name, "claim": self.claim, "value": self.value,
                "gate": self.gate, "passed": self.passed}


@dataclass
class Section:
    name: str
    checks: List[Check] = field(default_factory=list)
    results: dict = field(default_factory=dict)
    csvs: Dict[str, str] = field(default_factory=dict)

    def gate(self, name, claim, value, ok, gate):
        self.checks.append(Check(name, claim, value, gate, bool(ok)))

    def note(self, name, claim, value):
        self.checks.append(Check(name, claim, value))

    @property
    def ok(self) -> bool:
        return all(c.passed is not False for c in self.checks)

    def to_dict(self):
        return {"checks": self.checks, "results": self.results}


def _rng(seed: int, stream: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(key=[seed, stream]))


def _unit(rng, count, dim):
    U = rng.normal(size=(count, dim))
    return U / np.linalg.norm(U, axis=1, keepdims=True)


def boundary_points(dom: Domain, count: int, rng) -> np.ndarray:
    U = _unit(rng, count, dom.dim)
    t = ray_to_boundary(dom, np.broadcast_to(dom.witness, U.shape), U)
    return dom.witness + t[:, None] * U


# -- levi ---------------------------------------------------------------------------

def run_levi(cfg: ExperimentConfig, dom: Domain) -> Section:
    from .domain import levi_form

    sec = Section("levi")
    rng = _rng(cfg.run.seed, 1)
    B = boundary_points(dom, 32, rng)
    J = dom.J(B)
    jerr = float(np.max(np.abs(J @ J + np.eye(dom.dim))))
    sec.gate("j_squared", "J^2 = -I on boundary samples", jerr, jerr <= 1e-10, "<= 1e-10")
    g = np.linalg.norm(dom.rho.grad(B), axis=1)
    sec.gate("boundary_gradient", "grad rho != 0 on boundary samples", float(g.min()), g.min() > 1e-8, "> 1e-8")
    cert = check_strict_psh(dom, grid_res=cfg.levi.grid_res)
    sec.note("strict_psh", "minimal Levi eigenvalue on the box grid", cert.min_eigenvalue)
    V = rng.normal(size=B.shape)
    vals = np.array([levi_form(dom, b, v) for b, v in zip(B[:8], V[:8])])
    sec.results = {"min_levi_eigenvalue": cert.min_eigenvalue, "worst_point": cert.worst_point,
                   "psh_positive": cert.positive, "sample_levi_values": vals}
    return sec


# -- kobayashi ------------------------------------------------------------------------

def band_samples(dom: Domain, count: int, min_delta: float, rng):
    """Points at boundary distances log-spaced down to min_delta, random directions."""
    delta = np.exp(np.linspace(np.log(1.0 - 1e-9), np.log(min_delta), count))
    U = _unit(rng, count, dom.dim)
    P = (1.0 - delta)[:, None] * U
    V = rng.normal(size=(count, dom.dim))
    return P, V


def run_kobayashi(cfg: ExperimentConfig, dom: Domain) -> Section:
    from .curves import quasi_uniform_ball, sunflower_disk
    from .kobayashi import KobayashiEstimator, fit_band_constant, kob_distance_graph, oracle_distance_ball

    kc = cfg.kobayashi
    sec = Section("kobayashi")
    if dom.oracle is None:
        sec.note("oracle", "no closed-form Kobayashi oracle for this domain", None)
        return sec
    P, V = band_samples(dom, kc.band_points, kc.min_delta, _rng(cfg.run.seed, 2))
    C = fit_band_constant(dom, P, V)
    sec.gate("band_constant", "exact metric inside [B/C, C B]", C, C <= 10, "C <= 10")
    est = KobayashiEstimator.for_domain(dom, kc.strategy, kc.C or 3.0)
    target = np.zeros(dom.dim)
    target[0] = 0.5
    exact = oracle_distance_ball(dom.n, np.zeros(dom.dim), target)
    errs = []
    for count, k in ((kc.samples, kc.k_neighbors), (kc.refined_samples, kc.refined_k_neighbors)):
        if dom.n == 1:
            X = np.vstack([np.zeros(2), target, sunflower_disk(count - 2, kc.radius)])
        else:
            X = np.vstack([np.zeros(dom.dim), target,
                           quasi_uniform_ball(dom.dim, count - 2, kc.radius, seed=cfg.run.seed)])
        ms = kob_distance_graph(dom, X, k_neighbors=k, est=est, sources=[0, 1])
        errs.append(abs(ms.dist[0, 1] / exact - 1))
    sec.results = {"band_C": C, "exact": exact, "graph_rel_errors": errs}
    if dom.n == 1:
        sec.gate("graph_oracle", "graph distance 0 -> 0.5 vs arctanh(0.5)", errs[0], errs[0] <= 0.05, "<= 5%")
        sec.gate("graph_refinement", "refinement reduces the error", errs[1], errs[1] < errs[0], "< coarse error")
    else:
        sec.note("graph_oracle", "graph distance 0 -> 0.5 e1 relative error", errs)
    return sec


# -- carnot ---------------------------------------------------------------------------

def _cc_options(cfg: ExperimentConfig):
    from .carnot import CCOptions

    c = cfg.cc
    return CCOptions(vertices=tuple(int(v) for v in c.vertices.split(",")), penalty_weight=c.penalty_weight,
                     restarts=c.restarts, seed=cfg.run.seed, horiz_tol=c.horiz_tol, solver_tol=c.solver_tol)


def _random_unitary(rng):
    Z = rng.normal(size=(2, 2)) + 1j * rng.normal(size=(2, 2))
    Q, R = np.linalg.qr(Z)
    return Q * (np.diag(R) / np.abs(np.diag(R)))


def run_cc(cfg: ExperimentConfig, dom: Domain) -> Section:
    from .carnot import cc_distance
    from .oracles import dp_pair_distances, from_c2, to_c2

    sec = Section("cc")
    opts = _cc_options(cfg)
    rng = _rng(cfg.run.seed, 3)
    c = cfg.cc
    if dom.n == 1:
        th = rng.uniform(0, 2 * np.pi, size=(c.pairs, 2))
        vals = [cc_distance(dom, [np.cos(a), np.sin(a)], [np.cos(b), np.sin(b)]).value for a, b in th]
        dth = np.abs(th[:, 0] - th[:, 1])
        exact = np.sqrt(8 * np.pi * np.minimum(dth, 2 * np.pi - dth))
        err = float(np.max(np.abs(np.array(vals) / exact - 1)))
        if dom.name == "disk":
            sec.gate("planar_gauge", "unit-circle gauge vs sqrt(8 pi dtheta)", err, err <= 1e-5, "<= 1e-5")
        sec.results = {"values": vals}
        return sec
    A = boundary_points(dom, c.pairs, rng)
    Bp = boundary_points(dom, c.pairs, rng)
    vals = np.array([cc_distance(dom, a, b, opts).value for a, b in zip(A, Bp)])
    sec.results["values"] = vals
    sec.csvs["cc_pairs.csv"] = _pairs_csv(A, Bp, vals)
    if dom.name != "ball2":
        sec.note("cc_values", "boundary distances (no oracle for this domain)", vals)
        return sec
    dp = dp_pair_distances(A, Bp, base_count=c.dp_base, phase_bins=c.dp_phase_bins)
    rel = np.abs(vals / dp - 1)
    sec.gate("dp_oracle", "solver vs dynamic-programming oracle on S^3", float(rel.max()), rel.max() <= 0.05, "<= 5%")
    sym = []
    for a, b, v in list(zip(A, Bp, vals))[: c.symmetry_pairs]:
        w = cc_distance(dom, b, a, opts).value
        sym.append(abs(v - w) / max(v, w))
    sym = float(max(sym))
    sec.gate("symmetry", "d_H(a,b) = d_H(b,a)", sym, sym <= 2 * opts.solver_tol, f"<= {2 * opts.solver_tol:g}")
    rot = []
    for a, b, v in list(zip(A, Bp, vals))[: c.rotation_pairs]:
        U = _random_unitary(rng)
        ra, rb = from_c2(to_c2(a) @ U.T), from_c2(to_c2(b) @ U.T)
        rot.append(abs(cc_distance(dom, ra, rb, opts).value / v - 1))
    rot = float(max(rot))
    sec.gate("unitary_invariance", "U(2)-rotated pairs agree", rot, rot <= 0.02, "<= 2%")
    sec.results.update({"dp": dp, "symmetry": sym, "rotation": rot})
    return sec


def _pairs_csv(A, B, vals) -> str:
    d = A.shape[1]
    head = ",".join([f"a{i}" for i in range(d)] + [f"b{i}" for i in range(d)] + ["value"])
    rows = [",".join(format(x, ".17g") for x in np.concatenate([a, b, [v]])) for a, b, v in zip(A, B, vals)]
    return "\n".join([head] + rows) + "\n"


# -- g, d, delta, quasi-isometry -------------------------------------------------------

def _interior_samples(dom: Domain, count: int, radius: float, seed: int) -> np.ndarray:
    from .curves import quasi_uniform_ball, sunflower_disk

    if dom.n == 1:
        return sunflower_disk(count, radius)
    return quasi_uniform_ball(dom.dim, count, radius, seed=seed)


def _collar_samples(dom: Domain, count: int, rng) -> np.ndarray:
    from .balogh_bonk import lift_to_height

    B = boundary_points(dom, count, rng)
    h = np.exp(rng.uniform(np.log(0.03), np.log(np.sqrt(dom.collar_eps)), size=count))
    return np.array([lift_to_height(dom, b, t) for b, t in zip(B, h)])


def euclidean_control(side: int):
    from .metric_core import FiniteMetricSpace, delta_four_point

    g = np.stack(np.meshgrid(np.arange(float(side)), np.arange(float(side))), -1).reshape(-1, 2)
    d1 = delta_four_point(FiniteMetricSpace.from_points(g)).delta
    d2 = delta_four_point(FiniteMetricSpace.from_points(2 * g)).delta
    return d1, d2


def run_gmetric(cfg: ExperimentConfig, dom: Domain) -> Section:
    from .balogh_bonk import collar_test_curves, g_matrix, verify_length_estimates

    gc = cfg.gmetric
    sec = Section("gmetric")
    X = _interior_samples(dom, gc.samples, gc.radius, cfg.run.seed)
    G = g_matrix(dom, X, _cc_options(cfg))
    sec.csvs["g_matrix.csv"] = G.to_csv()
    sec.results["samples"] = len(X)
    if dom.n == 1:
        curves, normal = collar_test_curves(dom, gc.curves, seed=cfg.run.seed)
        rep = verify_length_estimates(dom, curves, normal, gc.C1, gc.C2)
        sec.gate("length_estimates", "Kobayashi length vs log height ratio, zero violations",
                 rep.violations, rep.violations == 0, "== 0")
        sec.gate("fitted_C1", "fitted C1", rep.fitted_C1, rep.fitted_C1 <= 4, "<= 4")
        sec.results["length_estimates"] = rep.to_dict()
    return sec


def run_delta(cfg: ExperimentConfig, dom: Optional[Domain]) -> Section:
    from .balogh_bonk import verify_gromov_inequality_g
    from .metric_core import FiniteMetricSpace, delta_four_point

    dc = cfg.delta
    sec = Section("delta")
    kw = {"mode": dc.mode, "budget": dc.budget, "seed": cfg.run.seed}
    if dc.csv:
        with open(dc.csv) as fh:
            ms = FiniteMetricSpace.from_csv(fh.read())
        rep = delta_four_point(ms, **kw)
        sec.note("delta", f"four-point delta of {len(ms.points)} points from CSV", rep.delta)
        sec.results["report"] = rep
        return sec
    rad = cfg.gmetric.radius
    r1 = verify_gromov_inequality_g(dom, _interior_samples(dom, dc.samples, rad, cfg.run.seed), _cc_options(cfg), **kw)
    r2 = verify_gromov_inequality_g(dom, _interior_samples(dom, 2 * dc.samples, rad, cfg.run.seed),
                                    _cc_options(cfg), **kw)
    stab = abs(r2.delta / r1.delta - 1) if r1.delta > 0 else float("inf")
    sec.gate("delta_g", "empirical delta of g (regression bound)", r1.delta, r1.delta <= 2.0, "<= 2.0")
    sec.gate("delta_g_stable", "delta stable when the sample doubles", stab, stab <= 0.2, "<= 20%")
    d1, d2 = euclidean_control(dc.control_side)
    sec.gate("euclidean_control", "Euclidean grid delta grows with diameter", d2 / d1, d2 >= 1.8 * d1, ">= 1.8x")
    sec.results = {"delta": r1, "delta_doubled": r2, "control": [d1, d2]}
    return sec


def run_dmetric(cfg: ExperimentConfig, dom: Domain) -> Section:
    from .balogh_bonk import d_matrix, g_matrix
    from .metric_core import fit_distortion

    dm = cfg.dmetric
    sec = Section("dmetric")
    X = _collar_samples(dom, dm.samples, _rng(cfg.run.seed, 4))
    opts = _cc_options(cfg)
    G = g_matrix(dom, X, opts)
    D = d_matrix(dom, X, ring=dm.ring, opts=opts, levels=dm.levels, k_neighbors=dm.k_neighbors)
    fit = fit_distortion(G, D, kind="rough")
    sec.gate("rough_g_d", "g and d roughly isometric on collar samples", fit.c,
             fit.c <= 3 and fit.violation_fraction == 0, "c <= 3, no violations")
    sec.results = {"fit": fit}
    sec.csvs["d_matrix.csv"] = D.to_csv()
    sec.csvs["collar_samples.csv"] = _points_csv(X)
    return sec


def run_qi(cfg: ExperimentConfig, dom: Domain) -> Section:
    from .balogh_bonk import g_matrix
    from .kobayashi import KobayashiEstimator, kob_distance_graph
    from .metric_core import delta_four_point, fit_distortion

    q = cfg.qi
    sec = Section("qi")
    if dom.oracle is None:
        sec.note("oracle", "no closed-form Kobayashi oracle for this domain", None)
        return sec
    X = _interior_samples(dom, q.graph_samples, q.radius, cfg.run.seed)
    idx = np.linspace(0, len(X) - 1, q.samples).astype(int)
    est = KobayashiEstimator.for_domain(dom)
    K = kob_distance_graph(dom, X, k_neighbors=q.k_neighbors, est=est, sources=idx)
    G = g_matrix(dom, X[idx], _cc_options(cfg), points=K.points)
    fit = fit_distortion(K, G, kind="quasi")
    sec.gate("quasi_isometry", "Kobayashi graph vs g quasi-isometric", fit.lam,
             fit.lam <= 8 and fit.violation_fraction == 0, "lambda <= 8, no violations")
    # finite delta that is stable under refinement of the graph
    K2 = kob_distance_graph(dom, _interior_samples(dom, 2 * q.graph_samples, q.radius, cfg.run.seed),
                            k_neighbors=q.k_neighbors, est=est,
                            sources=np.linspace(0, 2 * q.graph_samples - 1, q.samples).astype(int))
    dk, dk2 = delta_four_point(K).delta, delta_four_point(K2).delta
    sec.gate("kobayashi_delta", "Kobayashi delta stable under refinement", abs(dk2 / dk - 1),
             np.isfinite(dk) and abs(dk2 / dk - 1) <= 0.2, "<= 20%")
    sec.results = {"fit": fit, "kobayashi_delta": [dk, dk2]}
    sec.csvs["kobayashi_matrix.csv"] = K.to_csv()
    return sec


def _points_csv(X) -> str:
    head = ",".join(f"x{i}" for i in range(X.shape[1]))
    return "\n".join([head] + [",".join(format(v, ".17g") for v in row) for row in X]) + "\n"


# -- morse ---------------------------------------------------------------------------

def run_morse(cfg: ExperimentConfig, dom: Domain) -> Section:
    from .morse import boundary_connectedness, component_counts, find_critical_points, index_bound_check, \
        normal_form_fit

    mc = cfg.morse
    sec = Section("morse")
    cps = find_critical_points(dom, restarts=mc.restarts, seed=cfg.run.seed)
    sec.note("critical_points", "number of critical points found", len(cps))
    forms, bounds = [], []
    for cp in cps:
        if not cp.nondegenerate:
            bounds.append(None)
            forms.append(None)
            continue
        ok = index_bound_check(dom, cp)
        bounds.append({"index_le_n": ok, "index_lt_n": None if ok is None else cp.index < dom.n})
        forms.append(normal_form_fit(dom, cp))
        if ok is not None:
            sec.gate("index_bound", "index <= n at a psh critical point", cp.index, ok, f"<= {dom.n}")
        sec.gate("normal_form_index", "normal-form signs give the Hessian index",
                 forms[-1].index, forms[-1].index == cp.index, f"== {cp.index}")
    verdict = boundary_connectedness(dom, mc.grid_res, mc.trace_levels, cps=cps)
    fine = boundary_connectedness(dom, 2 * mc.grid_res, mc.trace_levels, cps=cps)
    sec.gate("grid_stability", "level-0 component count stable under grid doubling",
             [verdict.components, fine.components], verdict.components == fine.components, "equal")
    if verdict.refused:
        sec.note("verdict", verdict.note, verdict.components)
    else:
        sec.gate("connected", "boundary of a strictly psh region is connected", verdict.components,
                 verdict.connected, "== 1")
    levels = sorted({-cp.value + s for cp in cps if cp.nondegenerate for s in (-0.3, 0.3)})
    traces = [component_counts(dom, levels, r) for r in (mc.grid_res, 2 * mc.grid_res)] if levels else []
    if traces:
        sec.gate("count_stability", "counts near critical values stable under grid doubling",
                 traces[0].counts, traces[0].counts == traces[1].counts, "equal")
    sec.results = {"critical_points": cps, "index_bounds": bounds, "normal_forms": forms,
                   "verdict": verdict, "critical_value_traces": traces}
    return sec


PIPELINES: Dict[str, Callable] = {
    "levi": run_levi, "kobayashi": run_kobayashi, "cc": run_cc, "gmetric": run_gmetric,
    "dmetric": run_dmetric, "delta": run_delta, "qi-fit": run_qi, "morse": run_morse,
}

# what verify-all runs per domain dimension (the CC solver is expensive; d needs n = 1 to be cheap)
VERIFY_ALL = {1: ("levi", "kobayashi", "cc", "gmetric", "delta", "qi-fit", "dmetric", "morse"),
              2: ("levi", "kobayashi", "cc", "morse")}
