"""Polyline curves and deterministic sample generators."""
from __future__ import annotations

import csv
import io
from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy.stats import qmc


@dataclass(frozen=True)
class PolylineCurve:
    vertices: np.ndarray
    params: Optional[np.ndarray] = None

    def __post_init__(self):
        V = np.atleast_2d(np.asarray(self.vertices, dtype=float))
        object.__setattr__(self, "vertices", V)
        if self.params is None:
            object.__setattr__(self, "params", np.linspace(0.0, 1.0, len(V)))
        else:
            t = np.asarray(self.params, dtype=float)
            if t.shape != (len(V),) or np.any(np.diff(t) <= 0):
                raise ValueError("params must be strictly increasing, one per vertex")
            object.__setattr__(self, "params", t)

    def __len__(self):
        return len(self.vertices)

    @property
    def segments(self):
        V = self.vertices
        return 0.5 * (V[1:] + V[:-1]), V[1:] - V[:-1]

    def subdivide(self, k: int = 2) -> "PolylineCurve":
        """Insert k-1 evenly spaced points in every segment."""
        V, t = self.vertices, self.params
        s = np.linspace(0.0, 1.0, k + 1)[:-1]
        newV = (V[:-1, None, :] + s[None, :, None] * (V[1:] - V[:-1])[:, None, :]).reshape(-1, V.shape[1])
        newt = (t[:-1, None] + s[None, :] * np.diff(t)[:, None]).ravel()
        return PolylineCurve(np.vstack([newV, V[-1:]]), np.append(newt, t[-1]))

    @classmethod
    def segment(cls, a, b, pieces: int = 1) -> "PolylineCurve":
        a, b = np.asarray(a, float), np.asarray(b, float)
        s = np.linspace(0.0, 1.0, pieces + 1)[:, None]
        return cls(a + s * (b - a))

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["t"] + [f"p{i}" for i in range(self.vertices.shape[1])])
        for t, v in zip(self.params, self.vertices):
            w.writerow([format(float(t), ".17g")] + [format(float(x), ".17g") for x in v])
        return buf.getvalue()

    @classmethod
    def from_csv(cls, text: str) -> "PolylineCurve":
        rows = [r for r in csv.reader(io.StringIO(text)) if r][1:]
        arr = np.array([[float(x) for x in r] for r in rows])
        return cls(arr[:, 1:], arr[:, 0])


def halton(dim: int, count: int, seed: int = 0) -> np.ndarray:
    """Scrambled Halton points in [0, 1)^dim."""
    return qmc.Halton(d=dim, scramble=True, seed=seed).random(count)


def quasi_uniform_ball(dim: int, count: int, radius: float, seed: int = 0) -> np.ndarray:
    """Quasi-uniform points in the Euclidean ball of the given radius (Halton + rejection)."""
    out = []
    got = 0
    sampler = qmc.Halton(d=dim, scramble=True, seed=seed)
    while got < count:
        X = (2.0 * sampler.random(max(64, 2 * (count - got) * 2 ** dim // 2)) - 1.0) * radius
        X = X[np.linalg.norm(X, axis=1) <= radius]
        out.append(X)
        got += len(X)
    return np.vstack(out)[:count]


def sunflower_disk(count: int, radius: float, offset: float = 0.5) -> np.ndarray:
    """Vogel spiral: very even planar sampling of a disk."""
    k = np.arange(count) + offset
    r = radius * np.sqrt(k / (count - 1 + 2 * offset))
    th = k * np.pi * (3.0 - np.sqrt(5.0))
    return np.stack([r * np.cos(th), r * np.sin(th)], axis=1)
