"""Independent reference values for the sub-Riemannian distance on the unit
three-sphere, the boundary of the unit ball in C^2.

Horizontal curves on S^3 are exactly the horizontal lifts of curves on the
base S^2(1/2) of the Hopf fibration; the lift of a closed base loop returns
rotated by a phase fixed by the enclosed area. A distance from ``a`` to ``b``
is therefore the length of the shortest base path from pi(a) to pi(b) whose
lift ends at the right phase. We discretize that as shortest paths on a
product graph (base nodes) x (phase bins). Nothing here uses the penalty
solver or the Levi form code.

Lengths are measured with the Levi form of rho = |z|^2 - 1 restricted to the
complex tangent, which is twice the round length on S^3.
"""
from __future__ import annotations

import numpy as np
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import dijkstra
from scipy.spatial import cKDTree

LEVI_SCALE = 2.0


def to_c2(X) -> np.ndarray:
    X = np.asarray(X, float)
    return X[..., 0::2] + 1j * X[..., 1::2]


def from_c2(Z) -> np.ndarray:
    Z = np.asarray(Z, complex)
    out = np.empty(Z.shape[:-1] + (2 * Z.shape[-1],))
    out[..., 0::2], out[..., 1::2] = Z.real, Z.imag
    return out


def hopf(Z) -> np.ndarray:
    """Hopf map S^3 -> unit S^2 (the base scaled by 2)."""
    Z = np.asarray(Z, complex)
    z1, z2 = Z[..., 0], Z[..., 1]
    w = z1 * np.conj(z2)
    return np.stack([2 * w.real, 2 * w.imag, np.abs(z1) ** 2 - np.abs(z2) ** 2], axis=-1)


def hopf_section(U) -> np.ndarray:
    """A lift of unit S^2 points to S^3, smooth away from one pole in each chart."""
    U = np.asarray(U, float)
    X, Y, Z = U[..., 0], U[..., 1], U[..., 2]
    out = np.empty(U.shape[:-1] + (2,), complex)
    top = Z >= 0
    r1 = np.sqrt((1 + Z) / 2)
    r2 = np.sqrt((1 - Z) / 2)
    with np.errstate(invalid="ignore", divide="ignore"):
        # chart z1 > 0 real, and chart z2 > 0 real
        out[..., 0] = np.where(top, r1, (X + 1j * Y) / (2 * r2))
        out[..., 1] = np.where(top, (X - 1j * Y) / (2 * r1), r2)
    return out


def fibonacci_sphere(count: int) -> np.ndarray:
    k = np.arange(count) + 0.5
    z = 1 - 2 * k / count
    r = np.sqrt(1 - z ** 2)
    th = np.pi * (3 - np.sqrt(5)) * k
    return np.stack([r * np.cos(th), r * np.sin(th), z], axis=1)


def unitary_to_e1(a) -> np.ndarray:
    """U in SU(2) with U a = (1, 0)."""
    a = np.asarray(a, complex)
    a = a / np.linalg.norm(a)
    return np.array([[np.conj(a[0]), np.conj(a[1])], [-a[1], a[0]]])


def horizontal_pair_distance(a, b) -> float:
    """Exact distance when Im<a, b> = 0: a horizontal great circle is a geodesic."""
    a, b = np.asarray(a, complex), np.asarray(b, complex)
    return LEVI_SCALE * float(np.arccos(np.clip(np.real(np.vdot(a, b)), -1.0, 1.0)))


def vertical_pair_distance(psi: float) -> float:
    """Exact distance from a to exp(i psi) a.

    The optimal base loop is a circle enclosing area giving phase psi; the
    isoperimetric bound on S^2 yields LEVI_SCALE * sqrt(psi (2 pi - psi)).
    """
    psi = abs(float(np.angle(np.exp(1j * psi))))
    return LEVI_SCALE * float(np.sqrt(psi * (2 * np.pi - psi)))


def dp_distances(source, targets, base_count: int = 600, k_neighbors: int = 32,
                 phase_bins: int = 1024) -> np.ndarray:
    """Product-graph shortest paths from ``source`` to each target on S^3.

    Points are given as unit vectors in C^2 (or R^4). The source is rotated
    to (1, 0) by SU(2), which preserves both the contact structure and the
    Levi length. Base edges join k nearest neighbours and weigh the exact
    lift length of the base geodesic; the phase shift of an edge is the
    holonomy of the local section, rounded to the bin grid.
    """
    a = np.asarray(source)
    T = np.atleast_2d(np.asarray(targets))
    if not np.iscomplexobj(a):
        a = to_c2(a)
    if not np.iscomplexobj(T):
        T = to_c2(T)
    a = a / np.linalg.norm(a)
    T = T / np.linalg.norm(T, axis=1, keepdims=True)
    U = unitary_to_e1(a)
    T = T @ U.T
    e1 = np.array([1.0, 0.0], complex)

    base = list(fibonacci_sphere(base_count))
    sec = list(hopf_section(np.asarray(base)))
    # endpoints become nodes with their own exact sections; merge coincident
    # base points so no zero-length edge can carry a rounded phase
    ends = [e1] + list(T)
    node_of, phase_of = [], []
    for z in ends:
        p = hopf(z)
        hit = None
        for j in range(base_count, len(base)):
            if np.linalg.norm(base[j] - p) < 1e-12:
                hit = j
                break
        if hit is None:
            base.append(p)
            sec.append(z)
            node_of.append(len(base) - 1)
            phase_of.append(0.0)
        else:
            node_of.append(hit)
            phase_of.append(float(np.angle(np.vdot(sec[hit], z))))
    B = np.asarray(base)
    S = np.asarray(sec)
    M = len(B)

    k = min(k_neighbors + 1, M)
    _, nb = cKDTree(B).query(B, k=k)
    I = np.repeat(np.arange(M), k - 1)
    J = nb[:, 1:].ravel()
    pr = np.unique(np.sort(np.stack([I, J], 1), 1), axis=0)
    pr = pr[pr[:, 0] != pr[:, 1]]
    I = np.concatenate([pr[:, 0], pr[:, 1]])
    J = np.concatenate([pr[:, 1], pr[:, 0]])
    c = np.sum(np.conj(S[I]) * S[J], axis=1)
    W = LEVI_SCALE * np.arccos(np.clip(np.abs(c), 0.0, 1.0))
    step = 2 * np.pi / phase_bins
    shift = np.round(-np.angle(c) / step).astype(int)
    bins = np.arange(phase_bins)
    rows = (I[:, None] * phase_bins + bins).ravel()
    cols = (J[:, None] * phase_bins + (bins + shift[:, None]) % phase_bins).ravel()
    G = csr_matrix((np.repeat(W, phase_bins), (rows, cols)), shape=(M * phase_bins, M * phase_bins))

    src = node_of[0] * phase_bins + int(round(phase_of[0] / step)) % phase_bins
    D = dijkstra(G, indices=src)
    out = np.empty(len(T))
    for i in range(len(T)):
        b = int(round(phase_of[i + 1] / step)) % phase_bins
        out[i] = D[node_of[i + 1] * phase_bins + b]
    return out


def dp_pair_distances(A, B, **kw) -> np.ndarray:
    """DP distances for pairs (A[i], B[i]), all handled by one graph search.

    Each pair is moved by the SU(2) element taking A[i] to (1, 0).
    """
    A = np.atleast_2d(np.asarray(A))
    B = np.atleast_2d(np.asarray(B))
    if not np.iscomplexobj(A):
        A = to_c2(A)
    if not np.iscomplexobj(B):
        B = to_c2(B)
    T = np.array([unitary_to_e1(a) @ (b / np.linalg.norm(b)) for a, b in zip(A, B)])
    return dp_distances(np.array([1.0, 0.0], complex), T, **kw)
