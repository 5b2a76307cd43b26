"""Finitely supported Fourier fields on T^{d1+d2} and their parameter families.

Coefficients are stored centered: axis a of the array has length 2*box_a + 1
and position i holds the coefficient of frequency i - box_a.  Real scalar
fields are Hermitian under joint index negation.  Storage boxes use the max
norm per axis; the analytic mode norm (max of eigenprojection norms of n,
capped with |m|) is computed on demand for truncation and estimates.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field as dataclass_field
from functools import lru_cache

import numpy as np
import scipy.fft as sfft

from .errors import (
    DimensionMismatchError,
    GridSizeError,
    SupportEscapeError,
    TruncationError,
)
from .lattice import TorusAutomorphism
from .orbits import box_points

GRID_FACTOR = 4  # dealiasing rule G = 4 * box for nonlinear grid work
HERMITIAN_TOL = 1e-12


def normalize_box(box, naxes: int) -> tuple:
    b = np.atleast_1d(np.asarray(box, dtype=np.int64))
    if b.size == 1:
        b = np.repeat(b, naxes)
    if b.size != naxes:
        raise DimensionMismatchError(f"box needs {naxes} radii, got {b.size}")
    if (b < 0).any():
        raise ValueError("box radii must be nonnegative")
    return tuple(int(x) for x in b)


@dataclass
class FourierField:
    """Complex coefficient array over Z^{d1} x Z^{d2}, implicitly zero outside."""

    d1: int
    d2: int
    box: tuple
    coeffs: np.ndarray

    def __post_init__(self):
        self.box = normalize_box(self.box, self.d1 + self.d2)
        expected = tuple(2 * b + 1 for b in self.box)
        if self.coeffs.shape != expected:
            raise DimensionMismatchError(
                f"coeff shape {self.coeffs.shape} does not match box {self.box}"
            )
        if self.coeffs.dtype != np.complex128:
            self.coeffs = self.coeffs.astype(np.complex128)

    # -- constructors ------------------------------------------------------

    @classmethod
    def zeros(cls, d1: int, d2: int, box) -> "FourierField":
        box = normalize_box(box, d1 + d2)
        return cls(d1, d2, box, np.zeros(tuple(2 * b + 1 for b in box), np.complex128))

    @classmethod
    def from_modes(cls, d1: int, d2: int, box, modes: dict) -> "FourierField":
        """Build from {(n..., m...): coefficient}; Hermitian partner not implied."""
        out = cls.zeros(d1, d2, box)
        for idx, c in modes.items():
            out[tuple(idx)] = c
        return out

    @classmethod
    def real_cosine(cls, d1: int, d2: int, box, mode, amplitude=1.0, phase=0.0) -> "FourierField":
        """amplitude * cos(2 pi (k.z + phase)) as a Hermitian pair."""
        out = cls.zeros(d1, d2, box)
        c = 0.5 * amplitude * np.exp(2j * np.pi * phase)
        out[tuple(mode)] = out[tuple(mode)] + c
        out[tuple(-np.asarray(mode))] = out[tuple(-np.asarray(mode))] + np.conj(c)
        return out

    # -- indexing ----------------------------------------------------------

    def _pos(self, idx) -> tuple:
        idx = np.asarray(idx, dtype=np.int64)
        if np.any(np.abs(idx) > np.asarray(self.box)):
            raise IndexError(f"mode {idx.tolist()} outside box {self.box}")
        return tuple(idx + np.asarray(self.box))

    def __getitem__(self, idx):
        return self.coeffs[self._pos(idx)]

    def __setitem__(self, idx, value):
        self.coeffs[self._pos(idx)] = value

    def get(self, idx):
        """Coefficient lookup honoring the implicit zeros outside the box."""
        idx = np.asarray(idx, dtype=np.int64)
        if np.any(np.abs(idx) > np.asarray(self.box)):
            return 0.0 + 0.0j
        return self.coeffs[tuple(idx + np.asarray(self.box))]

    # -- algebra -----------------------------------------------------------

    def copy(self) -> "FourierField":
        return FourierField(self.d1, self.d2, self.box, self.coeffs.copy())

    def __add__(self, other: "FourierField") -> "FourierField":
        self._check_compatible(other)
        return FourierField(self.d1, self.d2, self.box, self.coeffs + other.coeffs)

    def __sub__(self, other: "FourierField") -> "FourierField":
        self._check_compatible(other)
        return FourierField(self.d1, self.d2, self.box, self.coeffs - other.coeffs)

    def __mul__(self, scalar) -> "FourierField":
        return FourierField(self.d1, self.d2, self.box, self.coeffs * scalar)

    __rmul__ = __mul__

    def __neg__(self) -> "FourierField":
        return self * (-1.0)

    def _check_compatible(self, other: "FourierField"):
        if (self.d1, self.d2, self.box) != (other.d1, other.d2, other.box):
            raise DimensionMismatchError("incompatible field layouts")

    # -- diagnostics ---------------------------------------------------------

    def hermitian_defect(self) -> float:
        flipped = np.conj(self.coeffs[tuple(slice(None, None, -1) for _ in self.box)])
        return float(np.abs(self.coeffs - flipped).max(initial=0.0))

    def hermitianize(self) -> "FourierField":
        flipped = np.conj(self.coeffs[tuple(slice(None, None, -1) for _ in self.box)])
        return FourierField(self.d1, self.d2, self.box, 0.5 * (self.coeffs + flipped))

    def l1(self) -> float:
        return float(np.abs(self.coeffs).sum())

    def coeff_sup(self) -> float:
        return float(np.abs(self.coeffs).max(initial=0.0))

    def pad_box(self, new_box) -> "FourierField":
        new_box = normalize_box(new_box, self.d1 + self.d2)
        if any(nb < b for nb, b in zip(new_box, self.box)):
            raise TruncationError("pad_box cannot shrink the box")
        out = FourierField.zeros(self.d1, self.d2, new_box)
        sl = tuple(slice(nb - b, nb + b + 1) for nb, b in zip(new_box, self.box))
        out.coeffs[sl] = self.coeffs
        return out

    def clip_box(self, new_box) -> tuple["FourierField", float]:
        """Restrict to a smaller box; returns (field, clipped l1 mass)."""
        new_box = normalize_box(new_box, self.d1 + self.d2)
        if any(nb > b for nb, b in zip(new_box, self.box)):
            raise TruncationError("clip_box cannot grow the box")
        sl = tuple(slice(b - nb, b + nb + 1) for nb, b in zip(new_box, self.box))
        kept = self.coeffs[sl].copy()
        mass = float(np.abs(self.coeffs).sum() - np.abs(kept).sum())
        return FourierField(self.d1, self.d2, new_box, kept), mass


# ---------------------------------------------------------------------------
# grids
# ---------------------------------------------------------------------------

def default_grid(box, factor: int = GRID_FACTOR) -> tuple:
    return tuple(max(factor * b, 2 * b + 1, 4) for b in box)


def _embed_fft(coeffs: np.ndarray, box: tuple, grid: tuple) -> np.ndarray:
    out = np.zeros(grid, dtype=np.complex128)
    pts = box_points(box)
    flat = coeffs.reshape(-1)
    idx = tuple(np.mod(pts[:, a], grid[a]) for a in range(len(box)))
    np.add.at(out, idx, flat)
    return out


@lru_cache(maxsize=64)
def _embed_slices(box: tuple, grid: tuple):
    """Per-axis index arrays mapping centered coefficients into FFT layout."""
    return tuple(
        np.mod(np.arange(-b, b + 1, dtype=np.int64), g) for b, g in zip(box, grid)
    )


def to_grid(v: FourierField, grid=None, workers: int = 1) -> np.ndarray:
    """Values on the uniform grid x_j = j / G (complex array).

    The default grid follows the dealiasing rule G = 4 * box per axis; pass
    an explicit grid for plain band-limited evaluation (G >= 2*box+1).
    """
    grid = tuple(grid) if grid is not None else default_grid(v.box)
    if any(g < 2 * b + 1 for g, b in zip(grid, v.box)):
        raise GridSizeError(f"grid {grid} below Nyquist for box {v.box}")
    arr = np.zeros(grid, dtype=np.complex128)
    ix = np.ix_(*_embed_slices(v.box, grid))
    arr[ix] = v.coeffs
    return sfft.ifftn(arr, workers=workers) * float(np.prod(grid))


def from_grid(values: np.ndarray, d1: int, d2: int, box, workers: int = 1) -> FourierField:
    """Projection of grid values onto the box modes (exact when band-limited)."""
    box = normalize_box(box, d1 + d2)
    grid = values.shape
    if any(g < 2 * b + 1 for g, b in zip(grid, box)):
        raise GridSizeError(f"grid {grid} below Nyquist for box {box}")
    hat = sfft.fftn(np.asarray(values, dtype=np.complex128), workers=workers)
    hat /= float(np.prod(grid))
    ix = np.ix_(*_embed_slices(box, grid))
    return FourierField(d1, d2, box, hat[ix].copy())


def grid_points(grid: tuple) -> list[np.ndarray]:
    """Meshgrid of torus coordinates for a given grid shape."""
    axes = [np.arange(g) / g for g in grid]
    return np.meshgrid(*axes, indexing="ij")


def sup_norm(v: FourierField, grid=None) -> float:
    vals = to_grid(v, grid=grid)
    return float(np.abs(vals).max())


def average(v: FourierField) -> complex:
    """The (0, ..., 0) coefficient, i.e. the mean over the torus."""
    return complex(v.coeffs[tuple(v.box)])


# ---------------------------------------------------------------------------
# mode norms, truncation, residue
# ---------------------------------------------------------------------------

@lru_cache(maxsize=32)
def _mode_norms_cached(matrix_key, d1: int, d2: int, box: tuple) -> np.ndarray:
    matrix = np.frombuffer(matrix_key, dtype=np.int64).reshape(d1, d1)
    A = TorusAutomorphism(matrix)
    split = A.dual().splitting
    n_box, m_box = box[:d1], box[d1:]
    n_pts = box_points(n_box).astype(float)
    n_norm = split.mode_norm(n_pts).reshape(tuple(2 * b + 1 for b in n_box))
    if d2:
        m_pts = box_points(m_box)
        m_norm = np.abs(m_pts).max(axis=1).reshape(tuple(2 * b + 1 for b in m_box))
        full = np.maximum(
            n_norm.reshape(n_norm.shape + (1,) * d2),
            m_norm.reshape((1,) * d1 + m_norm.shape),
        )
    else:
        full = n_norm
    full.setflags(write=False)
    return full


def mode_norms(v: FourierField, A: TorusAutomorphism) -> np.ndarray:
    """Analytic norm ||(n, m)|| per stored mode: eigenprojection norm of n
    (in the splitting of the dual map) capped with the sup norm of m."""
    if A.dim != v.d1:
        raise DimensionMismatchError("automorphism dimension must match d1")
    return _mode_norms_cached(A.matrix.tobytes(), v.d1, v.d2, v.box)


def truncate(v: FourierField, N, A: TorusAutomorphism) -> FourierField:
    """T_N v: keep exactly the modes with ||(n, m)|| <= N."""
    if N > max(np.asarray(v.box)) * _norm_equivalence(A, v):
        raise TruncationError(f"truncation level {N} exceeds the stored box {v.box}")
    mask = mode_norms(v, A) <= N
    return FourierField(v.d1, v.d2, v.box, np.where(mask, v.coeffs, 0.0))


def residue(v: FourierField, N, A: TorusAutomorphism) -> FourierField:
    """R_N v = v - T_N v."""
    return v - truncate(v, N, A)


def effective_level(v: FourierField, N, A: TorusAutomorphism) -> float:
    """min(N, largest mode norm in the box): the level at which T_N acts."""
    return float(min(N, mode_norms(v, A).max()))


@lru_cache(maxsize=32)
def _norm_equiv_cached(matrix_key, d1: int) -> float:
    matrix = np.frombuffer(matrix_key, dtype=np.int64).reshape(d1, d1)
    split = TorusAutomorphism(matrix).dual().splitting
    basis = np.eye(d1)
    return float(split.mode_norm(basis).max()) * d1


def _norm_equivalence(A: TorusAutomorphism, v: FourierField) -> float:
    return max(1.0, _norm_equiv_cached(A.matrix.tobytes(), v.d1))


# ---------------------------------------------------------------------------
# affine composition
# ---------------------------------------------------------------------------

def compose_affine(
    h: FourierField,
    A: TorusAutomorphism,
    shift,
    out_box=None,
    mode: str = "strict",
    escape_tol: float = 0.0,
) -> FourierField:
    """h o f for the affine map f(x, theta) = (A x, theta + shift).

    The output coefficient at (n, m) is h[(A^t)^{-1} n, m] e^{2 pi i <m, shift>}.
    In "strict" mode, coefficients of h (above escape_tol) whose image falls
    outside the output box raise SupportEscapeError; "clip" silently drops
    them (the caller truncates first / accounts for the mass).
    """
    if A.dim != h.d1:
        raise DimensionMismatchError("automorphism dimension must match d1")
    out_box = h.box if out_box is None else normalize_box(out_box, h.d1 + h.d2)
    if out_box[h.d1:] != h.box[h.d1:]:
        raise DimensionMismatchError("affine composition cannot change the m box")
    n_box_in, n_box_out = h.box[: h.d1], out_box[: h.d1]
    W = A.dual().matrix  # gather index: output (n, m) reads input at (W n, m)

    out_pts = box_points(n_box_out)
    src = out_pts @ W.T
    inside = np.all(np.abs(src) <= np.asarray(n_box_in), axis=1)

    n_shape_in = tuple(2 * b + 1 for b in n_box_in)
    n_in = int(np.prod(n_shape_in))
    m_shape = tuple(2 * b + 1 for b in h.box[h.d1:])
    coeffs_in = h.coeffs.reshape(n_in, -1)

    if mode == "strict":
        # input coefficients must land inside the output box: image of mode p
        # is A^t p
        in_pts = box_points(n_box_in)
        dest = in_pts @ A.matrix
        lost = ~np.all(np.abs(dest) <= np.asarray(n_box_out), axis=1)
        if lost.any():
            mass = float(np.abs(coeffs_in[lost]).max(initial=0.0))
            if mass > escape_tol:
                raise SupportEscapeError(
                    f"support escapes working box (max |c| = {mass:.3e}); "
                    "truncate first or enlarge out_box"
                )
    elif mode != "clip":
        raise ValueError(f"unknown mode {mode!r}")

    src_flat = np.zeros(out_pts.shape[0], dtype=np.int64)
    for a, g in enumerate(n_shape_in):
        src_flat = src_flat * g + np.where(inside, src[:, a] + n_box_in[a], 0)
    gathered = np.where(inside[:, None], coeffs_in[src_flat], 0.0)

    if h.d2:
        m_pts = box_points(h.box[h.d1:])
        phases = np.exp(2j * np.pi * (m_pts @ np.atleast_1d(np.asarray(shift, float))))
        gathered = gathered * phases[None, :]
    out_shape = tuple(2 * b + 1 for b in out_box)
    return FourierField(h.d1, h.d2, out_box, gathered.reshape(out_shape))


def derivative(v: FourierField, multi_index) -> FourierField:
    """Partial derivative as a Fourier multiplier (2 pi i k)^iota."""
    out = v.coeffs.copy()
    for a, p in enumerate(multi_index):
        if p == 0:
            continue
        b = v.box[a]
        freqs = (2j * np.pi * np.arange(-b, b + 1)) ** p
        shape = [1] * len(v.box)
        shape[a] = 2 * b + 1
        out = out * freqs.reshape(shape)
    return FourierField(v.d1, v.d2, v.box, out)


# ---------------------------------------------------------------------------
# vector fields
# ---------------------------------------------------------------------------

@dataclass
class VectorFourierField:
    """R^{d1+d2}-valued field: component arrays stacked on a leading axis."""

    d1: int
    d2: int
    box: tuple
    coeffs: np.ndarray  # shape (d1 + d2, *coeff_shape)

    def __post_init__(self):
        self.box = normalize_box(self.box, self.d1 + self.d2)
        d = self.d1 + self.d2
        expected = (d,) + tuple(2 * b + 1 for b in self.box)
        if self.coeffs.shape != expected:
            raise DimensionMismatchError(
                f"vector coeff shape {self.coeffs.shape}, expected {expected}"
            )
        if self.coeffs.dtype != np.complex128:
            self.coeffs = self.coeffs.astype(np.complex128)

    @classmethod
    def zeros(cls, d1: int, d2: int, box) -> "VectorFourierField":
        box = normalize_box(box, d1 + d2)
        d = d1 + d2
        return cls(d1, d2, box, np.zeros((d,) + tuple(2 * b + 1 for b in box), np.complex128))

    @classmethod
    def from_components(cls, components: list[FourierField]) -> "VectorFourierField":
        f0 = components[0]
        if len(components) != f0.d1 + f0.d2:
            raise DimensionMismatchError("need one component per torus dimension")
        coeffs = np.stack([c.coeffs for c in components], axis=0)
        return cls(f0.d1, f0.d2, f0.box, coeffs)

    def component(self, i: int) -> FourierField:
        return FourierField(self.d1, self.d2, self.box, self.coeffs[i].copy())

    def components(self) -> list[FourierField]:
        return [self.component(i) for i in range(self.d1 + self.d2)]

    def copy(self) -> "VectorFourierField":
        return VectorFourierField(self.d1, self.d2, self.box, self.coeffs.copy())

    def __add__(self, other):
        return VectorFourierField(self.d1, self.d2, self.box, self.coeffs + other.coeffs)

    def __sub__(self, other):
        return VectorFourierField(self.d1, self.d2, self.box, self.coeffs - other.coeffs)

    def __mul__(self, scalar):
        return VectorFourierField(self.d1, self.d2, self.box, self.coeffs * scalar)

    __rmul__ = __mul__

    def l1(self) -> float:
        return float(np.abs(self.coeffs).sum(axis=tuple(range(1, self.coeffs.ndim))).max())

    def sup_norm(self, grid=None) -> float:
        return max(sup_norm(c, grid=grid) for c in self.components())

    def hermitian_defect(self) -> float:
        return max(c.hermitian_defect() for c in self.components())

    def hermitianize(self) -> "VectorFourierField":
        return VectorFourierField.from_components([c.hermitianize() for c in self.components()])

    def elliptic_average(self) -> np.ndarray:
        """Means of the d2 elliptic components (real parts)."""
        center = (slice(None),) + tuple(self.box)
        return np.real(self.coeffs[center][self.d1:])

    def grids(self, grid=None, workers: int = 1) -> np.ndarray:
        grid = tuple(grid) if grid is not None else default_grid(self.box)
        out = np.empty((self.d1 + self.d2,) + grid, dtype=np.complex128)
        for i in range(self.d1 + self.d2):
            out[i] = to_grid(self.component(i), grid=grid, workers=workers)
        return out


def vector_from_grids(values: np.ndarray, d1: int, d2: int, box) -> VectorFourierField:
    comps = [from_grid(values[i], d1, d2, box) for i in range(values.shape[0])]
    return VectorFourierField.from_components(comps)


def eigen_decompose(vf: VectorFourierField, basis: np.ndarray) -> list[FourierField]:
    """Scalar coordinate fields of vf in the (columns-of-basis) eigenbasis."""
    d = vf.d1 + vf.d2
    if basis.shape != (d, d):
        raise DimensionMismatchError("basis must be d x d")
    coords = np.einsum("ij,j...->i...", np.linalg.inv(basis), vf.coeffs)
    return [FourierField(vf.d1, vf.d2, vf.box, coords[i]) for i in range(d)]


def eigen_reassemble(
    coords: list[FourierField], basis: np.ndarray, real_tol: float = 1e-10
) -> VectorFourierField:
    """Inverse of eigen_decompose; asserts the reassembled field is real."""
    stack = np.stack([c.coeffs for c in coords], axis=0)
    coeffs = np.einsum("ij,j...->i...", basis, stack)
    vf = VectorFourierField(coords[0].d1, coords[0].d2, coords[0].box, coeffs)
    defect = vf.hermitian_defect()
    if defect > real_tol:
        raise DimensionMismatchError(
            f"reassembled field is not real (Hermitian defect {defect:.2e})"
        )
    return vf.hermitianize()


# ---------------------------------------------------------------------------
# parameter families
# ---------------------------------------------------------------------------

@dataclass
class FrequencyFamily:
    """Frequency vector phi(t), polynomial in t or sampled per node."""

    interval: tuple
    d2: int
    poly: np.ndarray | None = None  # shape (deg+1, d2), ascending powers
    t_nodes: np.ndarray | None = None
    samples: np.ndarray | None = None  # shape (nodes, d2)

    @classmethod
    def polynomial(cls, interval, coeffs, d2=1) -> "FrequencyFamily":
        arr = np.atleast_1d(np.asarray(coeffs, dtype=float))
        if arr.ndim == 1:
            arr = arr[:, None]
        return cls(interval=tuple(interval), d2=arr.shape[1], poly=arr)

    @classmethod
    def constant(cls, interval, value, d2=None) -> "FrequencyFamily":
        v = np.atleast_1d(np.asarray(value, dtype=float))
        return cls.polynomial(interval, v[None, :], d2=len(v))

    @classmethod
    def sampled(cls, interval, t_nodes, samples) -> "FrequencyFamily":
        t = np.asarray(t_nodes, dtype=float)
        s = np.asarray(samples, dtype=float)
        if s.ndim == 1:
            s = s[:, None]
        return cls(interval=tuple(interval), d2=s.shape[1], t_nodes=t, samples=s)

    def eval(self, t) -> np.ndarray:
        t = np.asarray(t, dtype=float)
        if self.poly is not None:
            powers = t[..., None, None] ** np.arange(len(self.poly))[:, None]
            return (powers * self.poly).sum(axis=-2)
        return np.stack(
            [np.interp(t, self.t_nodes, self.samples[:, j]) for j in range(self.d2)],
            axis=-1,
        )

    def deriv(self, t, h: float = 1e-7) -> np.ndarray:
        t = np.asarray(t, dtype=float)
        if self.poly is not None and len(self.poly) > 1:
            k = np.arange(1, len(self.poly))
            powers = t[..., None, None] ** (k - 1)[:, None]
            return (powers * (self.poly[1:] * k[:, None])).sum(axis=-2)
        if self.poly is not None:
            return np.zeros(t.shape + (self.d2,))
        return (self.eval(t + h) - self.eval(t - h)) / (2 * h)

    def lip(self) -> float:
        """max(sup |phi|, Lipschitz constant) over the interval."""
        t = np.linspace(self.interval[0], self.interval[1], 513)
        vals = self.eval(t)
        sup = float(np.abs(vals).max())
        slopes = np.abs(np.diff(vals, axis=0) / np.diff(t)[:, None])
        return max(sup, float(slopes.max(initial=0.0)))

    def with_updates(self, t_nodes, deltas) -> "FrequencyFamily":
        """Per-node samples after a scheme update (poly rep is abandoned)."""
        base = self.eval(np.asarray(t_nodes, dtype=float))
        return FrequencyFamily.sampled(self.interval, t_nodes, base + np.asarray(deltas))


@dataclass
class ParamFamily:
    """Fields (or vectors) sampled on a uniform parameter grid."""

    interval: tuple
    grid: np.ndarray
    values: list
    lip_cache: dict = dataclass_field(default_factory=dict)

    def __post_init__(self):
        self.grid = np.asarray(self.grid, dtype=float)
        if len(self.grid) != len(self.values):
            raise DimensionMismatchError("one value per grid node required")
        if len(self.grid) > 2:
            sp = np.diff(self.grid)
            if sp.size and (np.abs(sp - sp[0]) > 1e-14 * max(1.0, abs(sp[0]))).any():
                raise DimensionMismatchError("parameter grid must be uniform")
        first = self.values[0]
        if hasattr(first, "box"):
            for v in self.values[1:]:
                if (v.d1, v.d2, v.box) != (first.d1, first.d2, first.box):
                    raise DimensionMismatchError("all nodes must share (d1, d2, box)")

    def __len__(self):
        return len(self.values)


def _derivative_multi_indices(r: int, naxes: int):
    """Multi-indices with max coordinate <= r (the family norm convention)."""
    from itertools import product

    return list(product(range(r + 1), repeat=naxes))


def lip_norm(family: ParamFamily, r: int, grid=None) -> float:
    """The C^{lip, r} family norm.

    max over multi-indices with every entry <= r of
    max(sup-norm of the derivative on the dealiased grid, successive
    difference quotients across parameter nodes).
    """
    first = family.values[0]
    naxes = first.d1 + first.d2
    if len(family.values) < 2:
        raise DimensionMismatchError("Lipschitz quotient needs at least 2 nodes")
    key = (r, tuple(grid) if grid is not None else None)
    if key in family.lip_cache:
        return family.lip_cache[key]
    best = 0.0
    dt = np.diff(family.grid)
    for iota in _derivative_multi_indices(r, naxes):
        grids = [to_grid(derivative(v, iota), grid=grid) for v in family.values]
        sup = max(float(np.abs(g).max()) for g in grids)
        quot = max(
            float(np.abs(g2 - g1).max()) / h
            for g1, g2, h in zip(grids[:-1], grids[1:], dt)
        )
        best = max(best, sup, quot)
    family.lip_cache[key] = best
    return best


def lip_norm_upper(family: ParamFamily, r: int) -> float:
    """Cheap certified upper bound for lip_norm via coefficient l1 sums."""
    first = family.values[0]
    naxes = first.d1 + first.d2
    best = 0.0
    dt = np.diff(family.grid)
    for iota in _derivative_multi_indices(r, naxes):
        l1s = [derivative(v, iota).l1() for v in family.values]
        best = max(best, max(l1s))
        if len(l1s) > 1:
            diffs = [
                derivative(v2 - v1, iota).l1() / h
                for v1, v2, h in zip(family.values[:-1], family.values[1:], dt)
            ]
            best = max(best, max(diffs))
    return best


# ---------------------------------------------------------------------------
# serialization
# ---------------------------------------------------------------------------

def field_to_dict(v: FourierField, tol: float = 0.0) -> dict:
    """JSON layout: explicit dims/box plus (n..., m..., re, im) rows."""
    pts = box_points(v.box)
    flat = v.coeffs.reshape(-1)
    keep = np.abs(flat) > tol
    rows = [
        [int(x) for x in pts[i]] + [float(flat[i].real), float(flat[i].imag)]
        for i in np.flatnonzero(keep)
    ]
    return {"d1": v.d1, "d2": v.d2, "box": list(v.box), "coeffs": rows}


def field_from_dict(data: dict) -> FourierField:
    out = FourierField.zeros(int(data["d1"]), int(data["d2"]), tuple(data["box"]))
    k = out.d1 + out.d2
    for row in data["coeffs"]:
        out[tuple(int(x) for x in row[:k])] = complex(row[k], row[k + 1])
    return out


def field_to_json(v: FourierField, tol: float = 0.0) -> str:
    return json.dumps(field_to_dict(v, tol=tol), sort_keys=True)


def field_from_json(text: str) -> FourierField:
    return field_from_dict(json.loads(text))
