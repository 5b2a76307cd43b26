"""Grid composition with near-identity maps and its inversion.

A field s with known coefficients is evaluated at displaced points
x + u(x) through the frozen-displacement Taylor sum

    s(x + u(x)) = sum_iota  d^iota s (x) * u(x)^iota / iota!

streamed over multi-indices of total order <= J, one inverse FFT per mixed
partial.  J is chosen adaptively from the l1 coefficient mass of s and the
sup of u, so the cost collapses as the scheme converges.  Only small fields
are ever composed this way; affine parts are handled exactly in coefficient
space elsewhere.
"""

from __future__ import annotations

import math
from itertools import product

import numpy as np

from .errors import InversionError
from .fields import (
    FourierField,
    VectorFourierField,
    default_grid,
    derivative,
    to_grid,
)

MAX_DEGREE = 24


def taylor_degree(l1_mass: float, step: float, tol: float) -> int:
    """Smallest J with l1_mass * step^{J+1} / (J+1)! <= tol."""
    if l1_mass == 0.0 or step == 0.0:
        return 0
    term = l1_mass
    for j in range(MAX_DEGREE + 1):
        term = term * step / (j + 1)
        if term <= tol:
            return j
    return MAX_DEGREE


def _multi_indices(naxes: int, degree: int):
    out = []
    for total in range(degree + 1):
        for iota in product(range(total + 1), repeat=naxes):
            if sum(iota) == total:
                out.append(iota)
    return out


def displacement_step(box, disp_sup) -> float:
    """sum_a 2 pi box_a * sup|u_a|: the per-order Taylor contraction factor."""
    return float(sum(2 * np.pi * b * s for b, s in zip(box, disp_sup)))


def compose_displaced(
    s: FourierField,
    disp: np.ndarray,
    tol: float = 1e-13,
    grid=None,
    degree: int | None = None,
    workers: int = 1,
) -> np.ndarray:
    """Grid values of s(x + u(x)) for a scalar field s and grids u (d, *G)."""
    grid = tuple(grid) if grid is not None else default_grid(s.box)
    naxes = s.d1 + s.d2
    disp_sup = [float(np.abs(disp[a]).max(initial=0.0)) for a in range(naxes)]
    if degree is None:
        degree = taylor_degree(s.l1(), displacement_step(s.box, disp_sup), tol)
    upows = _axis_powers(disp, degree)
    out = np.zeros(grid, dtype=np.complex128)
    for iota in _multi_indices(naxes, degree):
        part = to_grid(derivative(s, iota), grid=grid, workers=workers)
        mono = None
        fact = 1.0
        for a, p in enumerate(iota):
            if p:
                fact *= math.factorial(p)
                mono = upows[a][p] if mono is None else mono * upows[a][p]
        if mono is not None:
            part = part * mono
        out += part / fact
    return out


def _axis_powers(disp, degree):
    naxes = disp.shape[0]
    pows = []
    for a in range(naxes):
        axis = [None, np.asarray(disp[a])]
        for p in range(2, degree + 1):
            axis.append(axis[-1] * disp[a])
        pows.append(axis)
    return pows


def compose_displaced_vector(
    s: VectorFourierField,
    disp: np.ndarray,
    tol: float = 1e-13,
    grid=None,
    workers: int = 1,
) -> np.ndarray:
    """Componentwise compose_displaced with a shared degree choice."""
    grid = tuple(grid) if grid is not None else default_grid(s.box)
    naxes = s.d1 + s.d2
    disp_sup = [float(np.abs(disp[a]).max(initial=0.0)) for a in range(naxes)]
    step = displacement_step(s.box, disp_sup)
    degree = taylor_degree(s.l1(), step, tol)
    out = np.empty((naxes,) + grid, dtype=np.complex128)
    for i in range(naxes):
        out[i] = compose_displaced(
            s.component(i), disp, tol=tol, grid=grid, degree=degree, workers=workers
        )
    return out


def invert_displacement(
    h: VectorFourierField,
    tol: float = 1e-13,
    max_iter: int = 60,
    cert_tol: float = 1e-11,
    lip1_bound: float | None = None,
    grid=None,
    workers: int = 1,
) -> tuple[np.ndarray, dict]:
    """Displacement hbar of (Id + h)^{-1} on the grid, with a certificate.

    Runs the fixed-point iteration hbar <- -h o (Id + hbar) until the sup
    update drops below tol, then certifies the round trip
    (Id + h) o (Id + hbar) = Id within cert_tol.  The composition accuracy
    is tightened with the iterate so early sweeps stay cheap.
    """
    from .fields import lip_norm  # local import to avoid cycles in docs

    if lip1_bound is None:
        lip1_bound = _c1_upper(h)
    if lip1_bound > 0.5:
        raise InversionError(f"||h||_{{lip,1}} bound {lip1_bound:.3f} exceeds 1/2")
    grid = tuple(grid) if grid is not None else default_grid(h.box)
    naxes = h.d1 + h.d2
    hbar = -h.grids(grid=grid, workers=workers)
    update = float(np.abs(hbar).max(initial=0.0))
    info = {"iterations": 0, "update": update}
    if update == 0.0:
        info["roundtrip"] = 0.0
        return hbar.real, info
    for it in range(1, max_iter + 1):
        comp_tol = max(tol * 0.1, min(1e-13, update * update))
        new = -compose_displaced_vector(h, hbar.real, tol=comp_tol, grid=grid, workers=workers)
        update = float(np.abs(new - hbar).max())
        hbar = new
        info["iterations"] = it
        info["update"] = update
        if update <= tol:
            break
    else:
        raise InversionError(f"no convergence after {max_iter} iterations (update {update:.2e})")
    roundtrip = hbar + compose_displaced_vector(h, hbar.real, tol=tol * 0.01, grid=grid, workers=workers)
    info["roundtrip"] = float(np.abs(roundtrip).max())
    if info["roundtrip"] > cert_tol:
        raise InversionError(f"round trip defect {info['roundtrip']:.2e} exceeds {cert_tol}")
    return hbar.real, info


def _c1_upper(h: VectorFourierField) -> float:
    """l1 upper bound for max(sup |h|, sup |Dh|)."""
    best = 0.0
    for c in h.components():
        best = max(best, c.l1())
        for a in range(h.d1 + h.d2):
            iota = [0] * (h.d1 + h.d2)
            iota[a] = 1
            best = max(best, derivative(c, iota).l1())
    return best


def sparse_modes(vf: VectorFourierField, threshold: float = 0.0):
    """(modes, coeffs) arrays of the significant coefficients of a vector field."""
    from .orbits import box_points

    pts = box_points(vf.box)
    flat = vf.coeffs.reshape(vf.coeffs.shape[0], -1)
    mags = np.abs(flat).max(axis=0)
    keep = mags > threshold
    return pts[keep].astype(np.int64), flat[:, keep].copy()


def eval_modes(modes: np.ndarray, coeffs: np.ndarray, points: np.ndarray) -> np.ndarray:
    """Real part of the sparse mode sum at arbitrary points (rows)."""
    if modes.size == 0:
        return np.zeros((points.shape[0], coeffs.shape[0]))
    phases = np.exp(2j * np.pi * (points @ modes.T.astype(float)))
    return (phases @ coeffs.T).real
