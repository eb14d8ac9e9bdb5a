"""Finite metric spaces: Gromov products, four-point delta, axiom checks and
rough/quasi-isometry distortion fits."""
from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass, field
from math import comb
from typing import Hashable, Sequence

import numpy as np

DEFAULT_ATOL = 1e-9
DEFAULT_RTOL = 1e-9


@dataclass(frozen=True)
class FiniteMetricSpace:
    """Point identifiers plus a square distance matrix.

    Construction only checks shape and finiteness. Diagonal, symmetry and
    triangle defects are reported by :func:`check_metric_axioms` rather than
    rejected, so broken inputs can still be inspected.
    """

    points: tuple
    dist: np.ndarray
    tol: float = DEFAULT_ATOL

    def __post_init__(self):
        d = np.array(self.dist, dtype=float)
        pts = tuple(self.points)
        if d.ndim != 2 or d.shape[0] != d.shape[1]:
            raise ValueError(f"distance matrix must be square, got shape {d.shape}")
        if d.shape[0] != len(pts):
            raise ValueError(f"{len(pts)} point ids for a {d.shape[0]}x{d.shape[0]} matrix")
        if len(set(pts)) != len(pts):
            raise ValueError("point identifiers must be unique")
        if not np.all(np.isfinite(d)):
            raise ValueError("distance matrix has non-finite entries")
        if np.any(d < 0):
            raise ValueError("distance matrix has negative entries")
        d.setflags(write=False)
        object.__setattr__(self, "dist", d)
        object.__setattr__(self, "points", pts)
        object.__setattr__(self, "_index", {p: i for i, p in enumerate(pts)})

    def __len__(self):
        return len(self.points)

    def index(self, point: Hashable) -> int:
        try:
            return self._index[point]
        except KeyError:
            raise KeyError(f"unknown point identifier {point!r}") from None

    def d(self, x, y) -> float:
        return float(self.dist[self.index(x), self.index(y)])

    def subspace(self, ids: Sequence) -> "FiniteMetricSpace":
        idx = [self.index(p) for p in ids]
        return FiniteMetricSpace(tuple(ids), self.dist[np.ix_(idx, idx)], self.tol)

    @classmethod
    def from_matrix(cls, dist, points=None, tol: float = DEFAULT_ATOL):
        dist = np.asarray(dist, dtype=float)
        if points is None:
            points = tuple(range(dist.shape[0]))
        return cls(tuple(points), dist, tol)

    @classmethod
    def from_points(cls, coords, metric: str = "euclidean", points=None):
        from scipy.spatial.distance import cdist

        coords = np.asarray(coords, dtype=float)
        return cls.from_matrix(cdist(coords, coords, metric=metric), points)

    # -- serialization -------------------------------------------------------
    def to_json(self) -> str:
        from .report import dumps

        return dumps({"points": list(self.points), "dist": self.dist})

    @classmethod
    def from_json(cls, text: str) -> "FiniteMetricSpace":
        obj = json.loads(text)
        return cls.from_matrix(obj["dist"], obj["points"])

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow([str(p) for p in self.points])
        for row in self.dist:
            w.writerow([format(float(x), ".17g") for x in row])
        return buf.getvalue()

    @classmethod
    def from_csv(cls, text: str) -> "FiniteMetricSpace":
        rows = [r for r in csv.reader(io.StringIO(text)) if r]
        if not rows:
            raise ValueError("empty CSV")
        header, body = rows[0], rows[1:]
        ids = [_maybe_int(h.strip()) for h in header]
        return cls.from_matrix([[float(x) for x in r] for r in body], ids)


def _maybe_int(s: str):
    try:
        return int(s)
    except ValueError:
        return s


@dataclass(frozen=True)
class DeltaReport:
    delta: float
    quadruples_checked: int
    worst_quadruple: tuple
    mode: str

    def to_dict(self):
        return {
            "delta": self.delta,
            "quadruples_checked": self.quadruples_checked,
            "worst_quadruple": list(self.worst_quadruple),
            "mode": self.mode,
        }


@dataclass(frozen=True)
class DistortionFit:
    lam: float
    c: float
    kind: str
    violation_fraction: float

    def __post_init__(self):
        if self.kind == "rough" and self.lam != 1.0:
            raise ValueError("rough fits have lambda = 1")

    def to_dict(self):
        return {"lambda": self.lam, "c": self.c, "kind": self.kind,
                "violation_fraction": self.violation_fraction}


@dataclass
class AxiomReport:
    diagonal: list = field(default_factory=list)
    asymmetry: list = field(default_factory=list)
    triangle: list = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not (self.diagonal or self.asymmetry or self.triangle)

    def __len__(self):
        return len(self.diagonal) + len(self.asymmetry) + len(self.triangle)


def gromov_product(ms: FiniteMetricSpace, x, y, w) -> float:
    """(x|y)_w = (d(x,w) + d(y,w) - d(x,y)) / 2."""
    i, j, k = ms.index(x), ms.index(y), ms.index(w)
    d = ms.dist
    return 0.5 * (d[i, k] + d[j, k] - d[i, j])


def quadruple_defect(d: np.ndarray, x: int, y: int, z: int, w: int) -> float:
    """Unclamped four-point defect for the labelled quadruple (x, y, z, w)."""
    return 0.5 * (d[x, y] + d[z, w] - max(d[x, z] + d[y, w], d[x, w] + d[y, z]))


def _pair_sums(d, q):
    a, b, c, e = q.T
    return np.stack([d[a, b] + d[c, e], d[a, c] + d[b, e], d[a, e] + d[b, c]], axis=-1)


def _defect_of_quadruples(d: np.ndarray, q: np.ndarray) -> np.ndarray:
    # largest pair sum minus the second largest, halved
    s = np.sort(_pair_sums(d, q), axis=-1)
    return 0.5 * (s[:, 2] - s[:, 1])


def _exhaustive(d: np.ndarray, chunk: int):
    n = d.shape[0]
    best, worst = -np.inf, (0, 1, 2, 3)
    for w in range(n):
        rest = np.delete(np.arange(n), w)
        dw = d[rest, w]
        G = 0.5 * (dw[:, None] + dw[None, :] - d[np.ix_(rest, rest)])
        Gmin = G.copy()
        np.fill_diagonal(Gmin, -np.inf)
        Gsub = G.copy()
        np.fill_diagonal(Gsub, np.inf)
        m = len(rest)
        for s in range(0, m, chunk):
            blk = np.minimum(Gmin[s:s + chunk, :, None], Gmin[None, :, :])
            z = np.argmax(blk, axis=1)
            mm = np.take_along_axis(blk, z[:, None, :], axis=1)[:, 0, :]
            defect = mm - Gsub[s:s + chunk]
            k = int(np.argmax(defect))
            a, b = divmod(k, m)
            if defect[a, b] > best:
                best = float(defect[a, b])
                worst = (int(rest[s + a]), int(rest[b]), int(rest[z[a, b]]), int(w))
    return best, worst


def delta_four_point(ms: FiniteMetricSpace, mode: str = "exhaustive",
                     budget: int = 50_000_000, seed: int = 0) -> DeltaReport:
    """Four-point hyperbolicity constant of a finite metric space.

    The defect of a quadruple is half the gap between its two largest pair
    sums; ``delta`` is the maximum defect, clamped below at 0.

    ``exhaustive`` visits every quadruple of distinct points (reduced to a
    max-min product per basepoint). ``monte_carlo`` draws ``budget``
    quadruples from a Philox stream keyed by ``seed``.
    """
    n = len(ms)
    if n < 4:
        raise ValueError(f"need at least 4 points, got {n}")
    d = ms.dist
    if mode == "exhaustive":
        total = comb(n, 4)
        if total > budget:
            raise ValueError(f"{total} quadruples exceed the exhaustive budget {budget}")
        chunk = max(1, int(4_000_000 // max(n * n, 1)))
        best, worst = _exhaustive(d, chunk)
        checked = total
    elif mode == "monte_carlo":
        rng = np.random.Generator(np.random.Philox(key=int(seed)))
        best, worst, checked = -np.inf, (0, 1, 2, 3), 0
        batch = 200_000
        while checked < budget:
            m = min(batch, budget - checked)
            q = rng.integers(0, n, size=(2 * m + 16, 4))
            srt = np.sort(q, axis=1)
            q = q[np.all(np.diff(srt, axis=1) > 0, axis=1)][:m]
            if len(q) == 0:
                continue
            defect = _defect_of_quadruples(d, q)
            k = int(np.argmax(defect))
            if defect[k] > best:
                best = float(defect[k])
                worst = tuple(int(v) for v in q[k])
            checked += len(q)
    else:
        raise ValueError(f"unknown mode {mode!r}")
    worst_ids = tuple(ms.points[i] for i in worst)
    return DeltaReport(max(best, 0.0), checked, worst_ids, mode)


def check_metric_axioms(ms: FiniteMetricSpace, atol: float = DEFAULT_ATOL,
                        rtol: float = DEFAULT_RTOL) -> AxiomReport:
    """Report diagonal, symmetry and triangle violations beyond tolerance.

    Triangle entries are ``(i, j, k, excess)`` with ``i < j`` and ``k`` the
    detour point; ``excess = d[i,j] - d[i,k] - d[k,j]``.
    """
    d = ms.dist
    n = len(ms)
    rep = AxiomReport()
    for i in np.nonzero(np.abs(np.diag(d)) > atol)[0]:
        rep.diagonal.append((int(i), float(d[i, i])))
    asym = np.abs(d - d.T)
    bad = np.argwhere(np.triu(asym > atol + rtol * np.maximum(d, d.T), 1))
    rep.asymmetry = [(int(i), int(j), float(asym[i, j])) for i, j in bad]
    for k in range(n):
        detour = d[:, k][:, None] + d[k, :][None, :]
        excess = d - detour
        viol = excess > atol + rtol * detour
        viol[k, :] = False
        viol[:, k] = False
        for i, j in np.argwhere(np.triu(viol, 1)):
            rep.triangle.append((int(i), int(j), int(k), float(excess[i, j])))
    rep.triangle.sort()
    return rep


def _pairs(ms: FiniteMetricSpace):
    iu = np.triu_indices(len(ms), 1)
    return ms.dist[iu]


def quasi_c(a: np.ndarray, b: np.ndarray, lam: float) -> float:
    """Smallest c with a/lam - c <= b <= lam*a + c on every pair."""
    if a.size == 0:
        return 0.0
    return float(max(0.0, np.max(a / lam - b), np.max(b - lam * a)))


def fit_distortion(msA: FiniteMetricSpace, msB: FiniteMetricSpace, kind: str = "quasi",
                   grid_size: int = 64, lam_cap: float = 1e6) -> DistortionFit:
    """Fit rough (c) or quasi (lambda, c) isometry constants of the index map.

    For ``quasi`` the candidates are a geometric grid on [1, lam_max], where
    lam_max is the ratio envelope of the two matrices. Each candidate gets its
    minimal feasible c; the returned pair minimises ``c + (lam - 1) * s``
    with ``s`` half the median distance of ``msA`` (ties go to smaller lam).
    """
    if len(msA) != len(msB):
        raise ValueError(f"size mismatch: {len(msA)} vs {len(msB)}")
    a, b = _pairs(msA), _pairs(msB)
    if kind == "rough":
        c = float(np.max(np.abs(a - b))) if a.size else 0.0
        return DistortionFit(1.0, c, "rough", _violation_fraction(a, b, 1.0, c))
    if kind != "quasi":
        raise ValueError(f"unknown kind {kind!r}")
    pos = (a > 0) & (b > 0)
    if np.any(pos):
        ratio = np.concatenate([b[pos] / a[pos], a[pos] / b[pos]])
        lam_max = float(min(max(1.0, ratio.max()), lam_cap))
    else:
        lam_max = 1.0
    lams = np.geomspace(1.0, lam_max, grid_size) if lam_max > 1.0 else np.array([1.0])
    lams[-1] = lam_max
    s = 0.5 * float(np.median(a)) if a.size else 0.0
    best = None
    for lam in lams:
        c = quasi_c(a, b, float(lam))
        score = c + (lam - 1.0) * s
        if best is None or score < best[0] - 1e-12:
            best = (score, float(lam), c)
    _, lam, c = best
    return DistortionFit(lam, c, "quasi", _violation_fraction(a, b, lam, c))


def _violation_fraction(a, b, lam, c, slack=1e-12):
    if a.size == 0:
        return 0.0
    tol = slack * (1.0 + np.abs(a) + np.abs(b))
    bad = (b < a / lam - c - tol) | (b > lam * a + c + tol)
    return float(np.mean(bad))
