"""Pure-numpy kernels: twisted orbit sums and Birkhoff orbit stepping.

Reference implementations for the compiled extension; the recursions are
processed rank-layer by rank-layer with fancy indexing so they stay
vectorized over modes even without the C loops.
"""

from __future__ import annotations

import numpy as np

IMPL = "numpy"


def twisted_sums(vprime: np.ndarray, lam_m: np.ndarray, table) -> tuple[np.ndarray, np.ndarray]:
    """One-sided orbit sums of the twisted coefficient recursion.

    vprime has shape (P, M) over (dual lattice point, elliptic mode); lam_m
    is the per-mode twist.  Returns (forward, backward) sums; the forward
    sum h satisfies lam_m h[n] - h[W n] = v'[n] with h = 0 past the escape
    end, the backward sum satisfies the same relation with h = 0 before the
    chain roots.  The zero row is left at 0.
    """
    P, M = vprime.shape
    inv_lam = 1.0 / lam_m
    fwd = np.zeros((P, M), dtype=np.complex128)
    for members in table.layers_fwd:
        if members.size == 0:
            continue
        contrib = vprime[members] * inv_lam
        linked = table.img[members] >= 0
        if linked.any():
            src = members[linked]
            powers = inv_lam[None, :] ** table.jump[src][:, None]
            contrib[linked] += powers * fwd[table.img[src]]
        fwd[members] = contrib

    bwd = np.zeros((P, M), dtype=np.complex128)
    for members in table.layers_bwd:
        if members.size == 0:
            continue
        j = table.jump[members][:, None]
        target = table.img[members]
        bwd[target] = (lam_m[None, :] ** j) * bwd[members] - (
            lam_m[None, :] ** (j - 1)
        ) * vprime[members]
    return fwd, bwd


def birkhoff_orbits(
    points: np.ndarray,
    n_steps: int,
    linear: np.ndarray,
    shift: np.ndarray,
    modes: np.ndarray,
    coeffs: np.ndarray,
    d2: int,
) -> tuple[np.ndarray, np.ndarray]:
    """Iterate x' = (L x + shift + P(x)) mod 1 and average the displacement.

    P is the real part of a sparse trigonometric vector field given by
    integer modes (S, d) and complex coefficients (d, S); the returned array
    holds the per-orbit Birkhoff means of the last d2 displacement
    components (orbit_count, d2).
    """
    x = np.array(points, dtype=np.float64)
    lin = np.asarray(linear, dtype=np.float64)
    acc = np.zeros((x.shape[0], d2))
    two_pi = 2.0 * np.pi
    has_modes = modes.size > 0
    for _ in range(n_steps):
        disp = shift[None, :] + x @ (lin - np.eye(lin.shape[0])).T
        if has_modes:
            phases = np.exp((two_pi * 1j) * (x @ modes.T))
            disp = disp + (phases @ coeffs.T).real
        acc += disp[:, -d2:]
        x = np.mod(x + disp, 1.0)
    return x, acc / n_steps
