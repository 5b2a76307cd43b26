"""Exact integer dynamics of toral automorphisms and their spectral splittings.

Matrices are kept as integer arrays and all dynamical decisions (commutation,
ergodicity, powers, dual orbits) are made in exact integer arithmetic;
floating point enters only through eigen-decompositions used for projections.

Frame convention: quantities attached to the dual lattice (pivots, orbit
escapes, the Katznelson floor, the mode norm used for truncation) are always
computed in the spectral splitting of the automorphism that actually acts on
the frequency vectors.  Call sites that iterate the dual map pass
``A.dual()`` explicitly.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
import sympy

from .errors import (
    DimensionMismatchError,
    JordanCaseError,
    OrbitScanError,
    UnimodularityError,
)

MODULUS_TOL = 1e-12
RESIDUAL_TOL = 1e-10
EIG_COND_LIMIT = 1e8


# ---------------------------------------------------------------------------
# exact integer helpers
# ---------------------------------------------------------------------------

def _to_int_matrix(matrix) -> np.ndarray:
    m = np.asarray(matrix)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise DimensionMismatchError(f"expected a square matrix, got shape {m.shape}")
    if not np.issubdtype(m.dtype, np.integer):
        mi = np.rint(np.asarray(m, dtype=float)).astype(np.int64)
        if not np.array_equal(np.asarray(m, dtype=float), mi.astype(float)):
            raise UnimodularityError("matrix entries must be integers")
        m = mi
    out = m.astype(np.int64)
    out.setflags(write=False)
    return out


def int_det(matrix) -> int:
    """Exact determinant via sympy (entries are Python ints internally)."""
    return int(sympy.Matrix(np.asarray(matrix, dtype=object).tolist()).det())


def int_inverse(matrix) -> np.ndarray:
    """Exact inverse of a unimodular integer matrix."""
    m = sympy.Matrix(np.asarray(matrix, dtype=object).tolist())
    d = m.det()
    if abs(d) != 1:
        raise UnimodularityError(f"|det| = {abs(d)} != 1, integer inverse undefined")
    inv = m.adjugate() * int(d)  # adjugate/det with det = +-1
    return _to_int_matrix(np.array(inv.tolist(), dtype=np.int64))


def int_power(matrix, k: int) -> np.ndarray:
    """Exact integer power A^k (negative k uses the exact inverse)."""
    m = np.asarray(matrix, dtype=object)
    if k < 0:
        m = np.asarray(int_inverse(matrix), dtype=object)
        k = -k
    d = m.shape[0]
    out = np.eye(d, dtype=object)
    base = m
    while k:
        if k & 1:
            out = out @ base
        base = base @ base
        k >>= 1
    return out


def char_poly_coeffs(matrix) -> list[int]:
    """Integer coefficients of det(xI - A), highest degree first."""
    p = sympy.Matrix(np.asarray(matrix, dtype=object).tolist()).charpoly()
    return [int(c) for c in p.all_coeffs()]


# ---------------------------------------------------------------------------
# spectral splitting
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class SpectralSplitting:
    """Expanding / contracting / neutral decomposition of an integer matrix.

    Eigenvalues are classified by modulus against 1 with tolerance
    ``MODULUS_TOL``; the three spectral projectors are real, idempotent and
    sum to the identity within ``RESIDUAL_TOL``.
    """

    expanding: tuple
    contracting: tuple
    neutral: tuple
    rho: float | None
    proj_expanding: np.ndarray
    proj_contracting: np.ndarray
    proj_neutral: np.ndarray

    @property
    def has_expanding(self) -> bool:
        return len(self.expanding) > 0

    def projections(self, vectors) -> dict[str, np.ndarray]:
        """Euclidean norms of the three projections, vectorized over rows."""
        v = np.atleast_2d(np.asarray(vectors, dtype=float))
        out = {}
        for name, proj in (
            ("expanding", self.proj_expanding),
            ("contracting", self.proj_contracting),
            ("neutral", self.proj_neutral),
        ):
            out[name] = np.linalg.norm(v @ proj.T, axis=-1)
        return out

    def mode_norm(self, vectors) -> np.ndarray:
        """max of the nonempty subspace projection norms (Claim-style norm)."""
        v = np.atleast_2d(np.asarray(vectors, dtype=float))
        norms = []
        for part, proj in (
            (self.expanding, self.proj_expanding),
            (self.contracting, self.proj_contracting),
            (self.neutral, self.proj_neutral),
        ):
            if part:
                norms.append(np.linalg.norm(v @ proj.T, axis=-1))
        return np.max(norms, axis=0)


def _build_splitting(matrix: np.ndarray) -> SpectralSplitting:
    vals, vecs = np.linalg.eig(np.asarray(matrix, dtype=float))
    mod = np.abs(vals)
    exp_mask = mod > 1.0 + MODULUS_TOL
    con_mask = mod < 1.0 - MODULUS_TOL
    neu_mask = ~(exp_mask | con_mask)
    vinv = np.linalg.inv(vecs)

    def projector(mask):
        if not mask.any():
            return np.zeros(matrix.shape, dtype=float)
        p = (vecs * mask.astype(float)) @ vinv
        if np.abs(p.imag).max() > RESIDUAL_TOL:
            raise JordanCaseError("complex residue in spectral projector")
        return p.real

    p_exp, p_con, p_neu = projector(exp_mask), projector(con_mask), projector(neu_mask)
    total = p_exp + p_con + p_neu
    if np.abs(total - np.eye(matrix.shape[0])).max() > RESIDUAL_TOL:
        raise JordanCaseError("spectral projectors do not assemble to the identity")
    for p, q in ((p_exp, p_con), (p_exp, p_neu), (p_con, p_neu)):
        if np.abs(p @ q).max() > RESIDUAL_TOL:
            raise JordanCaseError("spectral projectors are not complementary")

    def collect(mask):
        return tuple((vals[i], vecs[:, i].copy()) for i in np.flatnonzero(mask))

    rho = float(mod[exp_mask].min()) if exp_mask.any() else None
    return SpectralSplitting(
        expanding=collect(exp_mask),
        contracting=collect(con_mask),
        neutral=collect(neu_mask),
        rho=rho,
        proj_expanding=p_exp,
        proj_contracting=p_con,
        proj_neutral=p_neu,
    )


# ---------------------------------------------------------------------------
# the automorphism type
# ---------------------------------------------------------------------------

class TorusAutomorphism:
    """Integer matrix with |det| = 1 acting on Z^d / T^d.

    The spectral splitting and the dual automorphism are computed lazily and
    cached; instances are immutable and safe to share across threads.
    """

    def __init__(self, matrix):
        self.matrix = _to_int_matrix(matrix)
        self.dim = self.matrix.shape[0]
        self.det = int_det(self.matrix)
        if abs(self.det) != 1:
            raise UnimodularityError(f"|det| = {abs(self.det)} != 1")
        self._splitting = None
        self._dual = None
        self._key = (self.dim, self.matrix.tobytes())

    def __repr__(self):
        return f"TorusAutomorphism({self.matrix.tolist()})"

    def __eq__(self, other):
        return isinstance(other, TorusAutomorphism) and self._key == other._key

    def __hash__(self):
        return hash(self._key)

    @property
    def splitting(self) -> SpectralSplitting:
        if self._splitting is None:
            self._splitting = _build_splitting(self.matrix)
        return self._splitting

    def eigenvalues(self) -> np.ndarray:
        return np.linalg.eigvals(np.asarray(self.matrix, dtype=float))

    def dual(self) -> "TorusAutomorphism":
        """The dual map A* = (A^t)^{-1} acting on frequency vectors."""
        if self._dual is None:
            self._dual = TorusAutomorphism(int_inverse(self.matrix.T))
        return self._dual

    def embed(self, d2: int) -> "TorusAutomorphism":
        """Block-diagonal extension (A, Id_{d2}) acting on T^{d+d2}."""
        d = self.dim
        out = np.eye(d + d2, dtype=np.int64)
        out[:d, :d] = self.matrix
        return TorusAutomorphism(out)

    def apply(self, vectors) -> np.ndarray:
        """Integer matrix-vector product, vectorized over rows."""
        v = np.asarray(vectors, dtype=np.int64)
        return v @ self.matrix.T

    def power(self, k: int) -> "TorusAutomorphism":
        return TorusAutomorphism(np.asarray(int_power(self.matrix, k), dtype=np.int64))

    def is_identity(self) -> bool:
        return bool(np.array_equal(self.matrix, np.eye(self.dim, dtype=np.int64)))


@dataclass(frozen=True)
class EigenPair:
    """Common eigenvector with its (lambda, mu) eigenvalue pair."""

    lam: complex
    mu: complex
    vector: np.ndarray

    def residual(self, A: TorusAutomorphism, B: TorusAutomorphism) -> float:
        ra = A.matrix @ self.vector - self.lam * self.vector
        rb = B.matrix @ self.vector - self.mu * self.vector
        return float(max(np.abs(ra).max(), np.abs(rb).max()))


# ---------------------------------------------------------------------------
# operations
# ---------------------------------------------------------------------------

def check_commuting(A: TorusAutomorphism, B: TorusAutomorphism) -> bool:
    """True iff AB = BA in exact integer arithmetic."""
    if A.dim != B.dim:
        raise DimensionMismatchError(f"dim {A.dim} vs {B.dim}")
    ab = np.asarray(A.matrix, dtype=object) @ np.asarray(B.matrix, dtype=object)
    ba = np.asarray(B.matrix, dtype=object) @ np.asarray(A.matrix, dtype=object)
    return bool(np.array_equal(ab, ba))


@lru_cache(maxsize=None)
def _cyclotomic_polys(max_degree: int):
    x = sympy.symbols("x")
    polys = []
    n = 1
    # totient(n) <= d forces n <= 2 d^2 + 1, scan a safe range
    while n <= 2 * max_degree * max_degree + 2:
        if sympy.totient(n) <= max_degree:
            polys.append(sympy.Poly(sympy.cyclotomic_poly(n, x), x))
        n += 1
    return tuple(polys)


def is_ergodic(A: TorusAutomorphism) -> bool:
    """Exact ergodicity test: no eigenvalue is a root of unity.

    Decided over the integers by checking whether det(xI - A) shares a factor
    with any cyclotomic polynomial of degree <= dim.
    """
    x = sympy.symbols("x")
    p = sympy.Poly(char_poly_coeffs(A.matrix), x)
    for cyc in _cyclotomic_polys(A.dim):
        if sympy.gcd(p, cyc).degree() > 0:
            return False
    return True


def check_hr(A: TorusAutomorphism, B: TorusAutomorphism, k_range: int = 10) -> bool:
    """Finite-range higher-rank check: A^k B^l ergodic on [-K, K]^2 \\ {0}.

    The genuine condition quantifies over all of Z^2; this surrogate records
    the scanned range in its report counterpart ``hr_report``.
    """
    return hr_report(A, B, k_range)["passed"]


def hr_report(A: TorusAutomorphism, B: TorusAutomorphism, k_range: int) -> dict:
    if not check_commuting(A, B):
        raise DimensionMismatchError("check_hr requires a commuting pair")
    witness = None
    for k in range(-k_range, k_range + 1):
        ak = int_power(A.matrix, k)
        for l in range(-k_range, k_range + 1):
            if k == 0 and l == 0:
                continue
            prod = ak @ int_power(B.matrix, l)
            if not is_ergodic(TorusAutomorphism(np.asarray(prod, dtype=np.int64))):
                witness = (k, l)
                break
        if witness is not None:
            break
    return {"passed": witness is None, "range": k_range, "witness": witness}


def dual_orbit(A: TorusAutomorphism, n, k: int) -> np.ndarray:
    """(A*)^k n in exact integer arithmetic."""
    w = int_power(A.dual().matrix, k)
    n = np.asarray(n, dtype=object)
    return np.asarray(n @ w.T, dtype=object)


def _orbit_scan_cap(n) -> int:
    norm = float(np.linalg.norm(np.asarray(n, dtype=float)))
    return int(64 * (1 + math.log(max(norm, 1.0))))


def find_pivot(A: TorusAutomorphism, n) -> tuple[np.ndarray, int]:
    """Orbit representative where the contracting projection stops dominating.

    Scans the dual orbit (A*)^k n and returns the point n* with
    contracting-projection >= expanding-projection while the next orbit point
    reverses the inequality; projections are taken in the splitting of the
    dual map.  Ties break toward the smallest |shift|, then shift >= 0.
    """
    n0 = np.asarray(n, dtype=np.int64)
    if not n0.any():
        raise OrbitScanError("pivot undefined for n = 0")
    dual = A.dual()
    split = dual.splitting
    if not (split.expanding and split.contracting):
        raise OrbitScanError("pivot search needs both expanding and contracting parts")
    cap = _orbit_scan_cap(n0)

    def dominance(vec) -> float:
        p = split.projections(vec)
        return float(p["contracting"][0] - p["expanding"][0])

    # contracting dominance strictly decreases along the forward dual orbit,
    # handle either starting side by walking toward the crossing
    def at(k):
        return np.asarray(dual_orbit(A, n0, k), dtype=object)

    shift = 0
    if dominance(np.asarray(at(0), dtype=float)) >= 0.0:
        while shift <= cap:
            if dominance(np.asarray(at(shift + 1), dtype=float)) < 0.0:
                return np.asarray(at(shift), dtype=np.int64), shift
            shift += 1
    else:
        shift = -1
        while shift >= -cap:
            if dominance(np.asarray(at(shift), dtype=float)) >= 0.0:
                return np.asarray(at(shift), dtype=np.int64), shift
            shift -= 1
    raise OrbitScanError(f"pivot scan exceeded |shift| <= {cap} for n = {n0.tolist()}")


@dataclass(frozen=True)
class KatznelsonBound:
    n_exp_norm: float
    floor: float
    constant: float


@lru_cache(maxsize=32)
def _katznelson_constant(key, sweep: int) -> float:
    matrix = np.frombuffer(key[1], dtype=np.int64).reshape(key[0], key[0])
    A = TorusAutomorphism(matrix)
    split = A.splitting
    d = A.dim
    rng = [np.arange(-sweep, sweep + 1)] * d
    grid = np.stack(np.meshgrid(*rng, indexing="ij"), axis=-1).reshape(-1, d)
    grid = grid[np.any(grid != 0, axis=1)]
    exp_norms = split.projections(grid)["expanding"]
    densities = exp_norms * (np.linalg.norm(grid, axis=1) ** d)
    return float(densities.min()) / 2.0


def katznelson_bound(A: TorusAutomorphism, n, sweep: int = 50) -> KatznelsonBound:
    """Expanding projection norm with its certified polynomial floor.

    The constant is calibrated per automorphism by minimizing
    ||n_exp|| * ||n||^d over the sweep box and halving the result; the
    returned bound asserts ||n_exp|| >= C ||n||^{-d}.
    """
    if not A.splitting.has_expanding:
        raise OrbitScanError("katznelson_bound needs a nonempty expanding part")
    n = np.asarray(n, dtype=np.int64)
    if not n.any():
        raise OrbitScanError("katznelson_bound undefined for n = 0")
    c = _katznelson_constant((A.dim, A.matrix.tobytes()), sweep)
    n_exp = float(A.splitting.projections(n)["expanding"][0])
    floor = c * float(np.linalg.norm(n)) ** (-A.dim)
    if n_exp < floor:
        raise OrbitScanError(
            f"calibrated Katznelson constant violated at n = {n.tolist()}: "
            f"{n_exp:.3e} < {floor:.3e}"
        )
    return KatznelsonBound(n_exp_norm=n_exp, floor=floor, constant=c)


def _cluster(values, tol=1e-7):
    order = np.lexsort((values.imag, values.real))
    clusters, current = [], [order[0]]
    for idx in order[1:]:
        if abs(values[idx] - values[current[-1]]) <= tol:
            current.append(idx)
        else:
            clusters.append(current)
            current = [idx]
    clusters.append(current)
    return clusters


def simultaneous_eigenbasis(
    A: TorusAutomorphism, B: TorusAutomorphism
) -> tuple[list[EigenPair], np.ndarray]:
    """Common eigenbasis of a commuting semisimple pair.

    Returns the EigenPair list together with the change-of-basis matrix V
    whose columns are the common eigenvectors (pair i in column i); complex
    pairs appear in conjugate-adjacent order.  Raises ``JordanCaseError``
    when the eigenvector matrix is ill-conditioned (cond > 1e8).
    """
    if not check_commuting(A, B):
        raise DimensionMismatchError("simultaneous_eigenbasis requires a commuting pair")
    am = np.asarray(A.matrix, dtype=float)
    bm = np.asarray(B.matrix, dtype=float)
    vals, vecs = np.linalg.eig(am)
    columns, lams, mus = [], [], []
    for cluster in _cluster(vals):
        sub = vecs[:, cluster]
        if len(cluster) == 1:
            basis = sub
        else:
            # refine the degenerate A-eigenspace with B's restriction; for an
            # embedded identity block keep the cleanest (sparsest) basis
            q, _ = np.linalg.qr(sub)
            restr = q.conj().T @ bm @ q
            if np.abs(restr - restr[0, 0] * np.eye(len(cluster))).max() < 1e-10:
                basis = _sparsify_block(q)
            else:
                _, r_vecs = np.linalg.eig(restr)
                basis = q @ r_vecs
        for j in range(basis.shape[1]):
            v = basis[:, j]
            v = v / np.linalg.norm(v)
            lam = complex(v.conj() @ am @ v)
            mu = complex(v.conj() @ bm @ v)
            columns.append(v)
            lams.append(lam)
            mus.append(mu)
    V = np.stack(columns, axis=1)
    if np.abs(V.imag).max() < 1e-12:
        V = V.real.astype(complex)
    if np.linalg.cond(V) > EIG_COND_LIMIT:
        raise JordanCaseError("Jordan case out of scope: eigenbasis ill-conditioned")
    order = _conjugate_order(np.asarray(lams), np.asarray(mus))
    V = V[:, order]
    pairs = []
    for i in order:
        pairs.append(EigenPair(lam=complex(lams[i]), mu=complex(mus[i]), vector=V[:, len(pairs)]))
    for p in pairs:
        if p.residual(A, B) > RESIDUAL_TOL:
            raise JordanCaseError(
                f"common eigenvector residual {p.residual(A, B):.2e} exceeds {RESIDUAL_TOL}"
            )
    return pairs, V


def _sparsify_block(q: np.ndarray) -> np.ndarray:
    """Rotate an orthonormal block toward coordinate axes when possible."""
    d, k = q.shape
    rows = np.argsort(-np.linalg.norm(q, axis=1))[:k]
    sub = q[np.sort(rows)]
    try:
        coeff = np.linalg.solve(sub.T @ sub if k == d else sub, np.eye(k)) if k == sub.shape[0] else None
    except np.linalg.LinAlgError:
        coeff = None
    if coeff is None:
        return q
    cand = q @ coeff
    return cand / np.linalg.norm(cand, axis=0)


def _conjugate_order(lams: np.ndarray, mus: np.ndarray) -> list[int]:
    """Real pairs first (ascending), then conjugate pairs adjacently."""
    idx = list(range(len(lams)))
    real = [i for i in idx if abs(lams[i].imag) < 1e-10 and abs(mus[i].imag) < 1e-10]
    cplx = [i for i in idx if i not in real]
    real.sort(key=lambda i: (lams[i].real, mus[i].real))
    ordered = list(real)
    used = set()
    cplx.sort(key=lambda i: (lams[i].real, abs(lams[i].imag), lams[i].imag))
    for i in cplx:
        if i in used:
            continue
        partner = min(
            (j for j in cplx if j not in used and j != i),
            key=lambda j: abs(lams[j] - np.conj(lams[i])),
            default=None,
        )
        first, second = (i, partner) if lams[i].imag > 0 else (partner, i)
        ordered.append(first)
        used.add(first)
        if second is not None:
            ordered.append(second)
            used.add(second)
    return ordered
