"""Dual-lattice orbit tables over a fixed coefficient box.

For an ergodic automorphism the dual map has no periodic orbits away from
zero, so the in-box points form disjoint chains n -> W^j n (first return,
j >= 1) ending at a point whose forward orbit never re-enters.  The twisted
coefficient recursions walk these chains; building and caching the table
once per (matrix, box) keeps the per-solve cost linear in the box size.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .errors import OrbitScanError
from .lattice import TorusAutomorphism


@dataclass(frozen=True)
class OrbitTable:
    """Chain structure of the dual map restricted to a box.

    img[i]   flat index of the first return W^{jump[i]} n_i, or -1 when the
             forward orbit leaves the box for good (-2 marks the zero row).
    rank[i]  distance to the end of the chain; img decreases rank by 1.
    class_rep[i]  flat index of the orbit-class representative used for
             obstruction removal (the balance pivot when it lies in the box,
             otherwise the in-box point of least mode norm).
    """

    box: tuple
    points: np.ndarray
    img: np.ndarray
    jump: np.ndarray
    rank: np.ndarray
    order_fwd: np.ndarray
    layers_fwd: tuple
    layers_bwd: tuple
    class_rep: np.ndarray
    rep_indices: np.ndarray
    zero_index: int
    mode_norms: np.ndarray

    @property
    def size(self) -> int:
        return self.points.shape[0]


def box_points(box: tuple) -> np.ndarray:
    """All integer points with |n_a| <= box_a, C-ordered like the coeff array."""
    axes = [np.arange(-b, b + 1, dtype=np.int64) for b in box]
    grid = np.meshgrid(*axes, indexing="ij")
    return np.stack(grid, axis=-1).reshape(-1, len(box))


def _flat_index(points: np.ndarray, box: tuple) -> np.ndarray:
    shape = tuple(2 * b + 1 for b in box)
    idx = points + np.asarray(box, dtype=np.int64)
    flat = np.zeros(points.shape[0], dtype=np.int64)
    for a, g in enumerate(shape):
        flat = flat * g + idx[:, a]
    return flat


@lru_cache(maxsize=16)
def _orbit_table_cached(matrix_key, box: tuple) -> OrbitTable:
    dim = len(box)
    matrix = np.frombuffer(matrix_key, dtype=np.int64).reshape(dim, dim)
    return _build_orbit_table(TorusAutomorphism(matrix), box)


def orbit_table(A: TorusAutomorphism, box) -> OrbitTable:
    """Cached orbit table of the dual map of A over the given n-box."""
    box = tuple(int(b) for b in np.atleast_1d(box))
    if len(box) == 1:
        box = box * A.dim
    return _orbit_table_cached(A.dual().matrix.tobytes(), box)


def _build_orbit_table(dual: TorusAutomorphism, box: tuple) -> OrbitTable:
    pts = box_points(box)
    P = pts.shape[0]
    W = dual.matrix
    split = dual.splitting
    vals = np.array([v for v, _ in split.expanding])
    vecs_inv = None
    if len(vals):
        # expanding eigen-coordinates: their l1 grows by at least rho per
        # step, giving a rigorous never-returns escape criterion
        full_vals, full_vecs = np.linalg.eig(np.asarray(W, dtype=float))
        sel = np.abs(full_vals) > 1.0 + 1e-12
        vecs_inv = np.linalg.inv(full_vecs)[sel]

    def exp_coord_mass(vectors):
        if vecs_inv is None:
            return np.zeros(len(vectors))
        return np.abs(vectors @ vecs_inv.T).sum(axis=-1)

    mass_cap = exp_coord_mass(pts.astype(float)).max() * (1 + 1e-9) + 1e-12

    box_arr = np.asarray(box, dtype=np.int64)
    zero_index = int(_flat_index(np.zeros((1, len(box)), dtype=np.int64), box)[0])

    img = np.full(P, -1, dtype=np.int64)
    jump = np.zeros(P, dtype=np.int64)
    img[zero_index] = -2

    cur = pts.copy()
    active = np.ones(P, dtype=bool)
    active[zero_index] = False
    max_norm = float(np.abs(pts).max(initial=1))
    cap = int(64 * (1 + np.log(max(max_norm, 1.0))))
    for step in range(1, cap + 1):
        if not active.any():
            break
        cur[active] = cur[active] @ W.T
        inside = active & np.all(np.abs(cur) <= box_arr, axis=1)
        if inside.any():
            img[inside] = _flat_index(cur[inside], box)
            jump[inside] = step
            active &= ~inside
        if active.any():
            gone = active.copy()
            gone[gone] = exp_coord_mass(cur[gone].astype(float)) > mass_cap
            img[gone] = -1
            active &= ~gone
    if active.any():
        raise OrbitScanError(
            f"{int(active.sum())} orbit(s) still wandering after {cap} steps"
        )

    rank = np.full(P, -1, dtype=np.int64)
    rank[img == -1] = 0
    rank[zero_index] = 0
    for _ in range(P):
        pending = rank < 0
        if not pending.any():
            break
        ready = pending & (rank[np.where(img >= 0, img, 0)] >= 0) & (img >= 0)
        if not ready.any():
            raise OrbitScanError("orbit chain graph is not acyclic")
        rank[ready] = rank[img[ready]] + 1

    order_fwd = np.argsort(rank, kind="stable").astype(np.int64)
    order_fwd = order_fwd[order_fwd != zero_index]

    max_rank = int(rank.max())
    layers_fwd, layers_bwd = [], []
    for r in range(max_rank + 1):
        members = np.flatnonzero(rank == r)
        members = members[members != zero_index]
        layers_fwd.append(members.astype(np.int64))
    for r in range(max_rank, -1, -1):
        members = np.flatnonzero((rank == r) & (img >= 0))
        layers_bwd.append(members.astype(np.int64))

    # orbit classes: terminal point of each chain
    class_id = np.arange(P, dtype=np.int64)
    for r in range(1, max_rank + 1):
        members = layers_fwd[r]
        class_id[members] = class_id[img[members]]

    mode_norms = split.mode_norm(pts.astype(float))
    nxt = pts @ W.T
    proj = split.projections(pts.astype(float))
    proj_next = split.projections(nxt.astype(float))
    is_pivot = (proj["contracting"] >= proj["expanding"]) & (
        proj_next["contracting"] < proj_next["expanding"]
    )
    is_pivot[zero_index] = False

    class_rep = np.full(P, -1, dtype=np.int64)
    order_by_quality = np.lexsort((np.arange(P), mode_norms, ~is_pivot))
    for i in order_by_quality[::-1]:
        if i == zero_index:
            continue
        class_rep[class_id[i]] = i
    class_rep_full = class_rep[class_id]
    class_rep_full[zero_index] = zero_index
    rep_indices = np.unique(class_rep_full[np.arange(P) != zero_index])

    pts_frozen = pts.copy()
    for arr in (pts_frozen, img, jump, rank, order_fwd, class_rep_full, rep_indices, mode_norms):
        arr.setflags(write=False)
    return OrbitTable(
        box=box,
        points=pts_frozen,
        img=img,
        jump=jump,
        rank=rank,
        order_fwd=order_fwd,
        layers_fwd=tuple(layers_fwd),
        layers_bwd=tuple(layers_bwd),
        class_rep=class_rep_full,
        rep_indices=rep_indices,
        zero_index=zero_index,
        mode_norms=mode_norms,
    )
