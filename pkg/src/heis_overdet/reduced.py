"""Toric/cylindrical reduction of the Heisenberg calculus.

A toric-symmetric function u(x, t) = U(s_1, ..., s_n, t) with
s_j = x_j^2 + x_{n+j}^2 is handled entirely in the reduced coordinates
(s, t) with sigma = sum_j s_j = |x|^2.  This module provides the reduced
operator L U = sigma U_tt + sum_j (s_j U_jj + U_j) = Delta_H u / 4, the
symmetric matrices entering the second-order analysis, the auxiliary
scalar v = |D_H u|^2 / F - alpha u, the sum-of-squares right-hand sides it
satisfies along solutions, and a basis of L-harmonic polynomials used to
generate nontrivial solutions of the reduced equation.

Most entry points take a single ReducedPoint; the underscore-prefixed
kernels accept batched (s, t) arrays and batched jets, which is how the
identity harness drives thousands of points at once.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InvalidInputError, SingularPointError, SymmetryViolationError
from .heisenberg import REL_FLOOR, ScalarField
from .jets import Jet, jet_space

VARIANTS = ("toric_general", "toric_n1", "toric_n2", "cylindrical")


# --------------------------------------------------------------------------
# reduced points and fields
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class ReducedPoint:
    """A point (s_1..s_n, t) with every s_j >= 0.  sigma is cached; points
    on the t-axis (sigma = 0) are valid data but rejected by the
    operations that need sigma > 0."""

    n: int
    s: np.ndarray
    t: float

    def __post_init__(self):
        s = np.asarray(self.s, dtype=float)
        if s.shape != (self.n,):
            raise InvalidInputError(f"s must have {self.n} entries, got shape {s.shape}")
        if np.any(s < 0.0):
            raise InvalidInputError("every s_j must be nonnegative")
        object.__setattr__(self, "s", s)
        object.__setattr__(self, "t", float(self.t))

    @property
    def sigma(self) -> float:
        return float(self.s.sum())

    def coords(self) -> list:
        return [*self.s, self.t]


@dataclass(frozen=True)
class ReducedField:
    """U(s, t) with the same dual float/Jet evaluation contract as
    ScalarField; coords are [s_1, ..., s_n, t]."""

    name: str
    fn: object

    def __call__(self, coords):
        return self.fn(coords)


@dataclass(frozen=True)
class CylindricalProfile:
    """W(sigma, t), the cylindrical specialization; coords are [sigma, t]."""

    name: str
    fn: object

    def __call__(self, coords):
        return self.fn(coords)


def reduced_seeds(s, t, order: int) -> list:
    s = np.asarray(s, dtype=float)
    sp = jet_space(s.shape[0] + 1, order)
    seeds = [Jet.seed(sp, j, s[j]) for j in range(s.shape[0])]
    seeds.append(Jet.seed(sp, s.shape[0], t))
    return seeds


def reduced_jet(U: ReducedField, p: ReducedPoint, order: int) -> Jet:
    return U(reduced_seeds(p.s, p.t, order))


def u_alpha_reduced(alpha: float, R: float) -> ReducedField:
    """The gauge-ball solution in reduced form:
    ((sigma^2 + t^2)^(alpha/4) - R^alpha) / alpha."""
    alpha = float(alpha)
    Ra = float(R) ** alpha

    def fn(coords):
        sig = coords[0]
        for c in coords[1:-1]:
            sig = sig + c
        t = coords[-1]
        return ((sig * sig + t * t) ** (alpha / 4.0) - Ra) / alpha

    return ReducedField(f"u_reduced(alpha={alpha},R={R})", fn)


def cylindrical_reduced_field(profile: CylindricalProfile, n: int) -> ReducedField:
    """Lift W(sigma, t) to U(s, t) = W(sum s_j, t); the resulting jets have
    the W-structure (all U_j equal, all U_jj equal)."""

    def fn(coords):
        sig = coords[0]
        for c in coords[1:-1]:
            sig = sig + c
        return profile([sig, coords[-1]])

    return ReducedField(f"cyl[{profile.name}]", fn)


def harmonic_basis(n: int, degree_cap: int = 2) -> list:
    """L-harmonic polynomials up to the degree cap: 1, t, s_i - s_j,
    t(s_i - s_j), and t^2 - (1/2) sum_k s_k^2."""
    if n < 1:
        raise InvalidInputError("n must be positive")
    if degree_cap > 2:
        raise InvalidInputError("degree_cap must be <= 2")
    basis = [ReducedField("one", lambda c: c[0] * 0.0 + 1.0)]
    if degree_cap >= 1:
        basis.append(ReducedField("t", lambda c: c[-1] + 0.0))
    if degree_cap >= 2:
        for i in range(n):
            for j in range(i + 1, n):
                basis.append(
                    ReducedField(f"s{i+1}-s{j+1}", lambda c, i=i, j=j: c[i] - c[j])
                )
        for i in range(n):
            for j in range(i + 1, n):
                basis.append(
                    ReducedField(
                        f"t(s{i+1}-s{j+1})", lambda c, i=i, j=j: c[-1] * (c[i] - c[j])
                    )
                )

        def radial(c):
            out = c[-1] * c[-1]
            for k in range(len(c) - 1):
                out = out - 0.5 * c[k] * c[k]
            return out

        basis.append(ReducedField("t^2-sum(s^2)/2", radial))
    return basis


def cylindrical_harmonic_basis(n: int) -> list:
    """L-harmonic polynomials with W-structure: 1, t, t^2 - sigma^2/(n+1)."""

    def radial(c):
        return c[-1] * c[-1] - _sigma_of(c) * _sigma_of(c) / (n + 1.0)

    return [
        ReducedField("one", lambda c: c[0] * 0.0 + 1.0),
        ReducedField("t", lambda c: c[-1] + 0.0),
        ReducedField("t^2-sigma^2/(n+1)", radial),
    ]


def _sigma_of(coords):
    sig = coords[0]
    for c in coords[1:-1]:
        sig = sig + c
    return sig


# --------------------------------------------------------------------------
# lifting full-space symmetric fields
# --------------------------------------------------------------------------

_LIFT_TOL = 1e-10


def lift_to_reduced(f: ScalarField, p: ReducedPoint, order: int = 3) -> Jet:
    """Jet of U(s, t) for a toric-symmetric full-space field u = f.

    The chain rule is applied by seeding the full-space evaluation with
    x_j = sqrt(s_j), x_{n+j} = 0; a second, block-rotated representative
    (x_j = 0, x_{n+j} = sqrt(s_j)) must produce the same jet, which
    detects asymmetric fields.  Requires every s_j > 0."""
    n = p.n
    if np.any(p.s <= 0.0):
        raise SingularPointError("lifting needs every s_j > 0")
    seeds = reduced_seeds(p.s, p.t, order)
    roots = [seeds[j].sqrt() for j in range(n)]
    zero = Jet.constant(seeds[0].space, 0.0)
    jet_a = f([*roots, *([zero] * n), seeds[-1]])
    jet_b = f([*([zero] * n), *roots, seeds[-1]])
    scale = max(np.max(np.abs(jet_a.coeff)), np.max(np.abs(jet_b.coeff)), 1.0)
    if np.max(np.abs(jet_a.coeff - jet_b.coeff)) > _LIFT_TOL * scale:
        raise SymmetryViolationError(
            f"field {f.name!r} is not toric symmetric: representative liftings disagree"
        )
    return jet_a


# --------------------------------------------------------------------------
# the reduced operator and the matrix bundle
# --------------------------------------------------------------------------


def _reduced_operator(U: Jet, s, t):
    s = np.asarray(s, dtype=float)
    n = s.shape[0]
    out = s.sum(axis=0) * U.second(n, n)
    for j in range(n):
        out = out + s[j] * U.second(j, j) + U.gradient()[j]
    return out


def reduced_operator(U: Jet, p: ReducedPoint) -> float:
    """L U = sigma U_tt + sum_j (s_j U_jj + U_j), one quarter of the
    subLaplacian of the lifted field."""
    return float(_reduced_operator(U, p.s, p.t))


@dataclass(frozen=True)
class MatrixBundle:
    """The symmetric (n+1)x(n+1) matrices of the second-order analysis at
    one point, together with the trace computed two ways."""

    n: int
    D2: np.ndarray
    E1: np.ndarray
    E2: np.ndarray
    D1: np.ndarray
    M: np.ndarray
    trace_M_direct: float
    trace_M_formula: float


def _matrix_bundle(U: Jet, s, t, alpha: float):
    """Batched bundle: matrices have shape (n+1, n+1) + batch."""
    s = np.asarray(s, dtype=float)
    t = np.asarray(t, dtype=float)
    if np.any(s < 0.0):
        raise InvalidInputError("matrix bundle needs every s_j >= 0")
    n = s.shape[0]
    sigma = s.sum(axis=0)
    if np.any(sigma <= 0.0):
        raise SingularPointError("matrix bundle needs sigma > 0")
    batch = U.batch
    q4 = sigma * sigma + t * t
    grad = U.gradient()
    Us, Ut = grad[:n], grad[n]
    root = np.sqrt(s)
    rsig = np.sqrt(sigma)

    shape = (n + 1, n + 1) + batch
    D2 = np.zeros(shape)
    E1 = np.zeros(shape)
    E2 = np.zeros(shape)
    for i in range(n):
        for j in range(i, n):
            rr = root[i] * root[j]
            D2[i, j] = D2[j, i] = rr * U.second(i, j)
            e1 = rr / sigma * 0.5 * (Us[i] + Us[j])
            if i == j:
                e1 = e1 - 0.5 * Us[i]
            E1[i, j] = E1[j, i] = e1
            E2[i, j] = E2[j, i] = rr * 0.5 * (Us[i] + Us[j])
        D2[i, n] = D2[n, i] = root[i] * rsig * U.second(i, n)
        E2[i, n] = E2[n, i] = root[i] / rsig * 0.5 * (sigma * Ut + t * Us[i])
    D2[n, n] = sigma * U.second(n, n)
    E1[n, n] = (s * Us).sum(axis=0) / (2.0 * sigma)
    E2[n, n] = t * Ut

    c = (2.0 * sigma / q4) * (alpha - 4.0) / 4.0
    D1 = E1 + c * E2
    M = D2 - D1

    trace_direct = np.trace(M, axis1=0, axis2=1)
    trace_formula = _reduced_operator(U, s, t)
    for j in range(n):
        trace_formula = trace_formula + Us[j] * (-0.5 - 1.5 * s[j] / sigma - c * s[j])
    trace_formula = trace_formula - c * t * Ut
    return D2, E1, E2, D1, M, trace_direct, trace_formula


def build_matrix_bundle(U: Jet, p: ReducedPoint, alpha: float) -> MatrixBundle:
    D2, E1, E2, D1, M, td, tf = _matrix_bundle(U, p.s, p.t, alpha)
    return MatrixBundle(p.n, D2, E1, E2, D1, M, float(td), float(tf))


def _frobenius_deficit(M: np.ndarray):
    m = M.shape[0]
    tr = np.trace(M, axis1=0, axis2=1)
    return (M * M).sum(axis=(0, 1)) - tr * tr / m


def frobenius_deficit(M: np.ndarray) -> float:
    """||M||_F^2 - (tr M)^2 / dim, nonnegative for symmetric M and zero
    exactly for multiples of the identity."""
    M = np.asarray(M, dtype=float)
    if M.ndim < 2 or M.shape[0] != M.shape[1]:
        raise InvalidInputError("M must be square")
    scale = np.max(np.abs(M)) if M.size else 0.0
    if np.max(np.abs(M - np.swapaxes(M, 0, 1))) > 1e-12 * max(scale, 1e-300):
        raise InvalidInputError("M must be symmetric")
    return _frobenius_deficit(M)


# --------------------------------------------------------------------------
# the auxiliary scalar v and its equation
# --------------------------------------------------------------------------


def _pfunction_g(U: Jet, s, t, alpha: float):
    s = np.asarray(s, dtype=float)
    n = s.shape[0]
    sigma = s.sum(axis=0)
    if np.any(sigma <= 0.0):
        raise SingularPointError("v is singular on the t-axis (sigma = 0)")
    grad = U.gradient()
    q4 = sigma * sigma + np.asarray(t, dtype=float) ** 2
    acc = grad[n] * grad[n]
    for j in range(n):
        acc = acc + (s[j] / sigma) * grad[j] * grad[j]
    return q4 ** ((4.0 - alpha) / 4.0) * acc


def pfunction(U: Jet, p: ReducedPoint, alpha: float) -> float:
    """v = |D_H u|^2 / F - alpha u in reduced form:
    4 (sigma^2+t^2)^((4-alpha)/4) (U_t^2 + sum_j (s_j/sigma) U_j^2) - alpha U."""
    return float(4.0 * _pfunction_g(U, p.s, p.t, alpha) - alpha * U.value)


def pfunction_g(U: Jet, p: ReducedPoint, alpha: float) -> float:
    """The auxiliary quotient g = (v + alpha U)/4."""
    return float(_pfunction_g(U, p.s, p.t, alpha))


def equality_case_gradient(p: ReducedPoint, alpha: float):
    """(W_sigma, W_t) of the rigidity system:
    (sigma/2, t/2) * (sigma^2+t^2)^((alpha-4)/4)."""
    q4 = p.sigma**2 + p.t**2
    fac = 0.5 * q4 ** ((alpha - 4.0) / 4.0)
    return fac * p.sigma, fac * p.t


# --------------------------------------------------------------------------
# sum-of-squares right-hand sides
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class RhsBreakdown:
    total: float
    terms: dict


def _check_variant(variant: str, n: int):
    if variant not in VARIANTS:
        raise InvalidInputError(f"unknown variant {variant!r}")
    if variant == "toric_n1" and n != 1:
        raise InvalidInputError("toric_n1 requires n == 1")
    if variant == "toric_n2" and n != 2:
        raise InvalidInputError("toric_n2 requires n == 2")
    if variant == "toric_general" and n < 2:
        raise InvalidInputError("toric_general requires n >= 2")


def _rhs_terms(variant: str, U: Jet, s, t, alpha: float) -> dict:
    """Named right-hand-side terms of the chosen identity, transcribed
    coefficient-for-coefficient; batched."""
    s = np.asarray(s, dtype=float)
    t = np.asarray(t, dtype=float)
    n = s.shape[0]
    _check_variant(variant, n)
    a = float(alpha)
    sigma = s.sum(axis=0)
    q4 = sigma * sigma + t * t
    F = sigma * q4 ** ((a - 4.0) / 4.0)
    grad = U.gradient()
    Us, Ut = grad[:n], grad[n]

    M = _matrix_bundle(U, s, t, alpha)[4]
    terms = {"matrix_deficit": 2.0 * _frobenius_deficit(M)}

    if variant == "cylindrical":
        for fam in (
            Us,
            np.stack([U.second(i, i) for i in range(n)]),
            np.stack([U.second(i, n) for i in range(n)]),
        ):
            spread = np.max(np.abs(fam - fam[:1]), axis=0)
            scale = np.maximum(np.max(np.abs(fam), axis=0), REL_FLOOR)
            if np.any(spread > 1e-12 * scale):
                raise InvalidInputError(
                    "cylindrical variant needs W-structure (all U_j equal, all U_jj equal)"
                )
        Ws, Wt = Us[0], Ut
        terms["gradient_sum"] = (2 * n + a) / (n + 1.0) * (Ws - 0.5 * F) ** 2
        terms["pohozaev_square"] = (
            (4.0 - a) * (2 * n + a) * (n - 1) / (4.0 * n + 4.0)
            * sigma * sigma / (q4 * q4)
            * (sigma * Ws + t * Wt - 0.5 * q4 ** (a / 4.0)) ** 2
        )
        terms["angular_momentum"] = (
            (4.0 - a) / (4.0 * q4)
            * (sigma * Wt - t * Ws) ** 2
            * ((n - 1) * (2 * n + 4) / (n + 1.0) * sigma * sigma / q4 + 4.0 / (n + 1.0))
        )
        return terms

    if variant == "toric_n1":
        terms["gradient_sum"] = (2.0 + a) / 2.0 * (Us[0] - 0.5 * F) ** 2
        terms["angular_momentum"] = (4.0 - a) / 2.0 / q4 * (sigma * Ut - t * Us[0]) ** 2
        return terms

    if variant == "toric_n2":
        sU = s[0] * Us[0] + s[1] * Us[1]
        terms["gradient_sum"] = (4.0 + a) / 12.0 * (Us[0] + Us[1] - F) ** 2
        terms["pohozaev_square"] = (
            (4.0 - a) * (4.0 + a) / 12.0
            * sigma * sigma / (q4 * q4)
            * (sU + t * Ut - 0.5 * q4 ** (a / 4.0)) ** 2
        )
        ang = 0.0
        for j in range(2):
            ang = ang + 8.0 * sigma * s[j] / (3.0 * q4 * q4) * (sigma * Ut - t * Us[j]) ** 2
        terms["angular_momentum"] = (4.0 - a) / 4.0 * ang
        terms["t_balance"] = (4.0 - a) / (12.0 * q4) * (t * Us[0] + t * Us[1] - 2.0 * sigma * Ut) ** 2
        terms["pairwise_bracket"] = (
            2.0 * (Us[0] - Us[1]) ** 2
            * ((4.0 - a) / 24.0 * sigma * sigma / q4
               + (4.0 - a) / 3.0 * sigma * sigma * s[0] * s[1] / (q4 * q4))
        )
        return terms

    # toric_general, n >= 2
    sumU = Us.sum(axis=0)
    sU = (s * Us).sum(axis=0)
    terms["gradient_sum"] = (
        (2 * n + a) / (n * n * (n + 1.0)) * (sumU - 0.5 * n * F) ** 2
    )
    terms["pohozaev_square"] = (
        (4.0 - a) * (2 * n + a) * (n - 1) / (4.0 * n + 4.0)
        * sigma * sigma / (q4 * q4)
        * (sU + t * Ut - 0.5 * q4 ** (a / 4.0)) ** 2
    )
    simplex = 0.0
    for j in range(n):
        simplex = simplex + (1.0 - n * s[j] / sigma) * (Us[j] - 0.5 * F) ** 2
    terms["simplex_weighted"] = (2 * n + a) * (n - 2) / (2.0 * n * (n + 1.0)) * simplex
    ang = 0.0
    for j in range(n):
        w = ((n - 1) * (2 * n + 4) / (n + 1.0) * sigma * s[j] / (q4 * q4)
             + (4.0 - 2 * n) / (n + 1.0) * s[j] / (sigma * q4))
        ang = ang + w * (sigma * Ut - t * Us[j]) ** 2
    terms["angular_momentum"] = (4.0 - a) / 4.0 * ang
    tb = 0.0
    pw = 0.0
    bracket_const = (
        (4.0 - a) * (n - 2) ** 2 / (8.0 * n * n * (n * n - 1.0))
        + (8.0 + 4 * n - n * n) / (4.0 * n * n * (n + 1.0))
    )
    for i in range(n):
        for j in range(n):
            if i == j:
                continue
            tb = tb + (t * Us[i] + t * Us[j] - 2.0 * sigma * Ut) ** 2
            bij = (
                bracket_const
                + (3.0 * n - 6.0) / (4.0 * n + 4.0) * s[i] * s[j] / (sigma * sigma)
                - 3.0 / (4.0 * n + 4.0) * (s[i] + s[j]) / sigma
                + (4.0 - a) / (4.0 * n + 4.0) * sigma * (s[i] + s[j]) / q4
                + (4.0 - a) * (4.0 - 2 * n) / (4.0 * n + 4.0) * s[i] * s[j] / q4
                - (4.0 - a) / (8.0 * (n * n - 1.0)) * sigma * sigma / q4
                + (4.0 - a) * (n - 1) * (n + 2) / (4.0 * n + 4.0)
                * sigma * sigma * s[i] * s[j] / (q4 * q4)
            )
            pw = pw + (Us[i] - Us[j]) ** 2 * bij
    terms["t_balance"] = (4.0 - a) / (8.0 * (n * n - 1.0)) / q4 * tb
    terms["pairwise_bracket"] = pw
    return terms


def rhs_sum_of_squares(
    variant: str, U: Jet, p: ReducedPoint, alpha: float
) -> RhsBreakdown:
    """Every right-hand-side term of the chosen identity, by name, plus
    their sum."""
    terms = _rhs_terms(variant, U, p.s, p.t, alpha)
    terms = {k: float(v) for k, v in terms.items()}
    return RhsBreakdown(total=float(sum(terms.values())), terms=terms)


def _lhs_via_jets(U: Jet, s, t, alpha: float):
    """(F/4) L v with the jet of v produced by order-3 jet arithmetic."""
    if U.order != 3:
        raise InvalidInputError("the left-hand side needs a jet of order exactly 3")
    s = np.asarray(s, dtype=float)
    t = np.asarray(t, dtype=float)
    n = s.shape[0]
    sigma = s.sum(axis=0)
    if np.any(sigma <= 0.0):
        raise SingularPointError("v is singular on the t-axis (sigma = 0)")
    sp2 = jet_space(n + 1, 2)
    seeds = [Jet.seed(sp2, j, s[j]) for j in range(n)] + [Jet.seed(sp2, n, t)]
    sigma_jet = seeds[0]
    for j in range(1, n):
        sigma_jet = sigma_jet + seeds[j]
    q4_jet = sigma_jet * sigma_jet + seeds[n] * seeds[n]
    inv_sigma = sigma_jet.reciprocal()
    Ut = U.derivative(n)
    acc = Ut * Ut
    for j in range(n):
        Uj = U.derivative(j)
        acc = acc + seeds[j] * inv_sigma * Uj * Uj
    v = 4.0 * (q4_jet ** ((4.0 - alpha) / 4.0)) * acc - alpha * U.truncated(2)
    F = sigma * (sigma * sigma + t * t) ** ((alpha - 4.0) / 4.0)
    return 0.25 * F * _reduced_operator(v, s, t)


def lhs_via_jets(U: Jet, p: ReducedPoint, alpha: float) -> float:
    """(F/16) Delta_H v, computed independently of the sum-of-squares
    transcription as (F/4) L v."""
    return float(_lhs_via_jets(U, p.s, p.t, alpha))
