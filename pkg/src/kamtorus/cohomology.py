"""Twisted cohomological equations over the dual lattice.

Obstruction functionals, exact solving of lambda h - h o f_phi = v for
truncated right-hand sides, obstruction removal through the commutation
relation, and the combined approximate splitting solve.  Coefficient
recursions run in the orbit kernels; every solve picks the numerically
stable one-sided sum for its twist regime and cross-checks the other side
with a conditioning-aware tolerance.
"""

from __future__ import annotations

from dataclasses import dataclass, field as dataclass_field

import numpy as np

from . import _kernels
from .errors import (
    CommutationError,
    ObstructionError,
    SmallDivisorError,
)
from .fields import (
    FourierField,
    average,
    compose_affine,
    effective_level,
    mode_norms,
    residue,
    truncate,
)
from .lattice import TorusAutomorphism
from .orbits import OrbitTable, box_points, orbit_table

UNIT_REGIME_TOL = 1e-9
OBSTRUCTION_TOL = 1e-10
COMMUTATION_TOL = 1e-9
TWO_SIDED_TOL = 1e-12


@dataclass
class TwistedEquation:
    """lambda h - h o f_phi = v with f_phi(x, theta) = (A x, theta + phi)."""

    lam: complex
    A: TorusAutomorphism
    phi: np.ndarray
    N: float
    divisor_exponent: float = 3.0
    cert: object | None = None  # DiophantineCert for the unit regime

    def __post_init__(self):
        self.phi = np.atleast_1d(np.asarray(self.phi, dtype=float))
        self.lam = complex(self.lam)

    @property
    def regime(self) -> str:
        mod = abs(self.lam)
        if mod > 1.0 + UNIT_REGIME_TOL:
            return "expanding"
        if mod < 1.0 - UNIT_REGIME_TOL:
            return "contracting"
        return "unit"

    def divisor_floor(self) -> float:
        return float(self.N) ** (-self.divisor_exponent)


def _lattice_data(v: FourierField, eq: TwistedEquation):
    """(table, vprime (P, M), lam_m (M,), m_points) for the kernel calls."""
    if eq.A.dim != v.d1:
        raise ObstructionError("equation automorphism does not match the field")
    n_box, m_box = v.box[: v.d1], v.box[v.d1:]
    table = orbit_table(eq.A, n_box)
    P = table.size
    coeffs = v.coeffs.reshape(P, -1)
    m_pts = box_points(m_box) if v.d2 else np.zeros((1, 0), dtype=np.int64)
    phase = np.exp(-2j * np.pi * (m_pts @ eq.phi)) if v.d2 else np.ones(1)
    vprime = coeffs * phase[None, :]
    lam_m = phase * eq.lam
    return table, vprime, lam_m, m_pts


def _one_sided_sums(v: FourierField, eq: TwistedEquation):
    table, vprime, lam_m, m_pts = _lattice_data(v, eq)
    fwd, bwd = _kernels.twisted_sums(vprime, lam_m, table)
    return table, fwd, bwd, lam_m, m_pts


def _conditioning(v: FourierField, eq: TwistedEquation, table) -> np.ndarray:
    """Accumulated |lambda|-weighted l1 mass of both sums (P, M), a
    certified scale for cancellation in the two-sided difference."""
    P = table.size
    mags = np.abs(v.coeffs.reshape(P, -1)).astype(np.complex128)
    lam_abs = np.full(mags.shape[1], abs(eq.lam), dtype=np.complex128)
    fwd, bwd = _kernels.twisted_sums(mags, lam_abs, table)
    return np.abs(fwd) + np.abs(bwd)


@dataclass
class ObstructionTable:
    """Per-orbit-class obstruction values at the class representatives."""

    reps: np.ndarray  # flat indices into the n-box
    rep_points: np.ndarray  # (R, d1) integer vectors
    values: np.ndarray  # (R, M) complex
    conditioning: np.ndarray  # (R, M) positive scale factors
    table: OrbitTable

    def max_scaled(self) -> float:
        return float((np.abs(self.values) / (1.0 + self.conditioning)).max(initial=0.0))

    def max_abs(self) -> float:
        return float(np.abs(self.values).max(initial=0.0))


def obstruction_table(v: FourierField, eq: TwistedEquation) -> ObstructionTable:
    """Obstructions O_{n, m}(v) evaluated at one representative per orbit."""
    table, fwd, bwd, _, _ = _one_sided_sums(v, eq)
    O = fwd - bwd
    cond = _conditioning(v, eq, table)
    reps = table.rep_indices
    return ObstructionTable(
        reps=reps,
        rep_points=table.points[reps],
        values=O[reps],
        conditioning=cond[reps],
        table=table,
    )


def obstruction(v: FourierField, eq: TwistedEquation, n, m=()) -> complex:
    """O^A_{n, m}(v): the two-sided dual-orbit sum at one mode.

    Walks the exact integer orbit of n under the dual map, summing
    lambda_m^{-(k+1)} v'_{A^k n, m} over every k whose orbit point carries a
    stored coefficient; finite because the orbit escapes the support.
    """
    from .lattice import dual_orbit

    n = np.asarray(n, dtype=np.int64)
    if not n.any():
        raise ObstructionError("obstructions are defined for n != 0 only")
    m = np.atleast_1d(np.asarray(m, dtype=np.int64)) if np.ndim(m) else np.asarray([m])
    m = m.astype(np.int64).reshape(-1)
    phase = np.exp(-2j * np.pi * float(m @ eq.phi)) if m.size else 1.0
    lam_m = phase * eq.lam
    n_box = np.asarray(v.box[: v.d1])
    cap = int(64 * (1 + np.log(max(float(np.abs(n).max()), 1.0)))) + 8

    def coeff_at(pt):
        idx = tuple(np.concatenate([pt, m]))
        return v.get(idx)

    total = 0.0 + 0.0j
    pt = n.astype(object)
    for k in range(cap + 1):
        if np.all(np.abs(pt.astype(float)) <= n_box):
            total += lam_m ** (-(k + 1)) * phase * coeff_at(pt.astype(np.int64))
        pt = dual_orbit(eq.A, pt, 1)
        if np.abs(pt.astype(float)).max() > 1e9:
            break
    pt = dual_orbit(eq.A, n, -1)
    for k in range(-1, -(cap + 1), -1):
        if np.all(np.abs(pt.astype(float)) <= n_box):
            total += lam_m ** (-(k + 1)) * phase * coeff_at(pt.astype(np.int64))
        pt = dual_orbit(eq.A, pt, -1)
        if np.abs(pt.astype(float)).max() > 1e9:
            break
    return complex(total)


def solve_twisted(
    v: FourierField,
    eq: TwistedEquation,
    out_box=None,
    obstruction_tol: float = OBSTRUCTION_TOL,
    check_obstructions: bool = True,
    check_two_sided: bool = True,
) -> FourierField:
    """Solution h of lambda h - h o f_phi = v for obstruction-free truncated v.

    Nonzero-n coefficients come from the one-sided orbit sum on the stable
    side of the twist regime (forward for |lambda| >= 1, backward below);
    with vanishing obstructions the two sides agree, which is asserted at
    the orbit representatives with a conditioning-aware tolerance.  The
    n = 0 modes divide by lambda - e^{2 pi i <m, phi>} up to |m| <= N and
    vanish beyond; for lambda = 1 the mean must vanish and h_{0,0} = 0.
    """
    if out_box is not None:
        v = v.pad_box(out_box)
    table, fwd, bwd, lam_m, m_pts = _one_sided_sums(v, eq)
    P = table.size
    M = fwd.shape[1]

    if check_obstructions or check_two_sided:
        cond = _conditioning(v, eq, table)
        reps = table.rep_indices
        gap = np.abs(fwd[reps] - bwd[reps])
        scaled = gap / (1.0 + cond[reps])
        if check_obstructions and scaled.size and scaled.max() > obstruction_tol:
            raise ObstructionError(
                f"nonvanishing obstruction: max scaled magnitude {scaled.max():.3e}"
            )
        if check_two_sided and scaled.size and scaled.max() > max(TWO_SIDED_TOL, obstruction_tol):
            raise ObstructionError(
                f"one-sided sums disagree beyond tolerance: {scaled.max():.3e}"
            )

    h2d = fwd if abs(eq.lam) >= 1.0 - UNIT_REGIME_TOL else bwd
    h2d = h2d.copy()

    # n = 0 row: small divisor modes
    m_sup = np.abs(m_pts).max(axis=1) if m_pts.shape[1] else np.zeros(1)
    divisors = eq.lam - np.exp(2j * np.pi * (m_pts @ eq.phi)) if m_pts.shape[1] else np.asarray(
        [eq.lam - 1.0]
    )
    v0 = v.coeffs.reshape(P, M)[table.zero_index]
    h0 = np.zeros(M, dtype=np.complex128)
    inside = (m_sup <= eq.N) & (m_sup > 0)
    if np.abs(v0[m_sup > eq.N]).max(initial=0.0) > 1e-12:
        raise ObstructionError("v_{0,m} must vanish for |m| > N")
    if eq.regime == "unit":
        small = inside & (np.abs(divisors) < eq.divisor_floor())
        if small.any():
            worst = int(np.flatnonzero(small)[np.argmin(np.abs(divisors[small]))])
            raise SmallDivisorError(
                f"divisor {abs(divisors[worst]):.3e} below N^-{eq.divisor_exponent:g} "
                f"at m = {m_pts[worst].tolist()}; certify phi first"
            )
    h0[inside] = v0[inside] / divisors[inside]
    zero_mode = m_sup == 0
    if abs(eq.lam - 1.0) <= UNIT_REGIME_TOL:
        if np.abs(v0[zero_mode]).max(initial=0.0) > 1e-10:
            raise ObstructionError("average(v) must vanish when lambda = 1")
    else:
        h0[zero_mode] = v0[zero_mode] / (eq.lam - 1.0)
    h2d[table.zero_index] = h0

    return FourierField(v.d1, v.d2, v.box, h2d.reshape(v.coeffs.shape))


def twisted_residual(h: FourierField, v: FourierField, eq: TwistedEquation) -> FourierField:
    """lambda h - h o f_phi - v on h's box (clipped affine composition)."""
    comp = compose_affine(h, eq.A, eq.phi, mode="clip")
    out = h * eq.lam - comp
    vv = v if v.box == h.box else v.pad_box(h.box)
    return out - vv


def coboundary(h: FourierField, eq: TwistedEquation, out_box=None) -> FourierField:
    """lambda h - h o f_phi with the support tracked exactly.

    The output box defaults to the smallest one containing both h and the
    image of its support under the affine composition, so the coboundary is
    exact (no clipping).
    """
    if out_box is None:
        amp = int(np.abs(np.asarray(eq.A.matrix)).sum(axis=0).max())
        out_box = tuple(
            b * amp if a < h.d1 else b for a, b in enumerate(h.box)
        )
    hp = h.pad_box(out_box)
    comp = compose_affine(hp, eq.A, eq.phi, mode="strict")
    return hp * eq.lam - comp


def remove_obstructions(
    v: FourierField,
    w: FourierField,
    eqA: TwistedEquation,
    eqB: TwistedEquation,
    phi_comm: FourierField,
    tol_comm: float = COMMUTATION_TOL,
    post_tol: float = OBSTRUCTION_TOL,
    check_commutation: bool = True,
) -> tuple[FourierField, dict]:
    """Correction vtilde supported on orbit representatives.

    vtilde kills every nonzero-n obstruction of v: the single coefficient
    lambda * O_{n*, m}(v) at the class representative n* satisfies
    O(v - vtilde) = 0 classwise.  The l1 norm of the correction is reported
    against ||phi_comm|| (the commutation error controls it).
    """
    if check_commutation:
        defect = commutation_defect(v, w, eqA, eqB, phi_comm)
        if defect > tol_comm:
            raise CommutationError(
                f"commutation identity violated: defect {defect:.3e} > {tol_comm}"
            )

    table, fwd, bwd, lam_m, _ = _one_sided_sums(v, eqA)
    O = fwd - bwd
    tilde2d = np.zeros_like(O)
    reps = table.rep_indices
    tilde2d[reps] = eqA.lam * O[reps]
    vtilde = FourierField(v.d1, v.d2, v.box, tilde2d.reshape(v.coeffs.shape))

    # post-verification: the corrected field is obstruction free
    diff = v - vtilde
    post = obstruction_table(diff, eqA)
    if post.max_scaled() > post_tol:
        raise ObstructionError(
            f"obstruction removal failed: residual obstruction {post.max_scaled():.3e}"
        )

    report = {
        "vtilde_l1": vtilde.l1(),
        "vtilde_sup_coeff": vtilde.coeff_sup(),
        "phi_comm_l1": phi_comm.l1(),
        "ratio_vs_comm": vtilde.l1() / phi_comm.l1() if phi_comm.l1() > 0 else 0.0,
        "post_obstruction": post.max_scaled(),
        "classes": int(reps.size),
    }
    return vtilde, report


def linear_commutator(
    v: FourierField, w: FourierField, eqA: TwistedEquation, eqB: TwistedEquation
) -> FourierField:
    """(lambda w - w o f_phi) - (mu v - v o g_psi), exact on coefficients."""
    wa = compose_affine(w, eqA.A, eqA.phi, mode="clip")
    vb = compose_affine(v, eqB.A, eqB.phi, mode="clip")
    return (w * eqA.lam - wa) - (v * eqB.lam - vb)


def commutation_defect(
    v: FourierField,
    w: FourierField,
    eqA: TwistedEquation,
    eqB: TwistedEquation,
    phi_comm: FourierField,
) -> float:
    diff = linear_commutator(v, w, eqA, eqB) - phi_comm
    return diff.l1()


@dataclass
class ApproximateSolveResult:
    h: FourierField
    res_v: FourierField
    res_w: FourierField
    vtilde: FourierField
    phi_comm: FourierField
    report: dict


def approximate_solve(
    v: FourierField,
    w: FourierField,
    eqA: TwistedEquation,
    eqB: TwistedEquation,
    N: float,
    r: int = 1,
    rp: int = 3,
    sigma_ref: float | None = None,
    tol_comm: float = COMMUTATION_TOL,
) -> ApproximateSolveResult:
    """Approximate simultaneous solve of the split pair of twisted equations.

    Pipeline: truncate v at the effective level of N, remove the nonzero-n
    obstructions with the commutation correction, solve the A-equation
    exactly for the corrected right side, and report both residuals
    res_v = R_N v + vtilde (an identity of the pipeline) and the directly
    recomputed res_w.  When (lambda, mu) = (1, 1) both averages must vanish.
    """
    lam, mu = eqA.lam, eqB.lam
    unit_pair = abs(lam - 1.0) <= UNIT_REGIME_TOL and abs(mu - 1.0) <= UNIT_REGIME_TOL
    if unit_pair:
        for name, f in (("v", v), ("w", w)):
            if abs(average(f)) > 1e-10:
                raise ObstructionError(
                    f"(1,1) regime requires zero average, got {abs(average(f)):.2e} for {name}"
                )

    phi_comm = linear_commutator(v, w, eqA, eqB)
    n_eff = effective_level(v, N, eqA.A)
    tv = truncate(v, n_eff, eqA.A)
    rv = v - tv

    vtilde, removal_report = remove_obstructions(
        v=tv, w=w, eqA=eqA, eqB=eqB, phi_comm=phi_comm, check_commutation=False
    )
    rhs = tv - vtilde
    h = solve_twisted(rhs, eqA)

    res_v = rv + vtilde
    wcomp = compose_affine(h, eqB.A, eqB.phi, mode="clip")
    res_w = w - (h * mu - wcomp)

    if sigma_ref is None:
        sigma_ref = eqA.A.dim + 2.0
    S = 1.0 + float(np.abs(eqA.phi).max(initial=0.0) + np.abs(eqB.phi).max(initial=0.0))
    nn = max(float(n_eff), 1.0)
    v_r = _c_norm_upper(v, r)
    v_rp = _c_norm_upper(v, rp)
    w_rp = _c_norm_upper(w, rp)
    comm_norm = _c_norm_upper(phi_comm, max(r - 2, 0))
    bounds = {
        "h": {
            "lhs": _c_norm_upper(h, r + 1),
            "rhs": S * nn**sigma_ref * (v_r + comm_norm),
        },
        "res_v": {
            "lhs": _c_norm_upper(res_v, r),
            "rhs": nn ** (eqA.A.dim + r - rp) * v_rp + S * nn**sigma_ref * comm_norm,
        },
        "res_w": {
            "lhs": _c_norm_upper(res_w, r),
            "rhs": nn ** (eqA.A.dim + r - rp) * w_rp + S * nn**sigma_ref * comm_norm,
        },
    }
    for entry in bounds.values():
        entry["ratio"] = entry["lhs"] / entry["rhs"] if entry["rhs"] > 0 else 0.0

    report = {
        "N": float(N),
        "N_effective": float(n_eff),
        "sigma_ref": float(sigma_ref),
        "removal": removal_report,
        "bounds": bounds,
        "commutation_l1": phi_comm.l1(),
    }
    return ApproximateSolveResult(
        h=h, res_v=res_v, res_w=res_w, vtilde=vtilde, phi_comm=phi_comm, report=report
    )


def _c_norm_upper(f: FourierField, r: int) -> float:
    """l1 multiplier bound for the C^r norm (max coordinate convention)."""
    from .fields import derivative

    best = 0.0
    naxes = f.d1 + f.d2
    from itertools import product as iproduct

    for iota in iproduct(range(r + 1), repeat=naxes):
        best = max(best, derivative(f, iota).l1())
    return best
