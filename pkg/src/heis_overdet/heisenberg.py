"""Exact Heisenberg-group arithmetic and sub-Riemannian differential
operators.

Points of H^n are (x, t) with x in R^{2n}; the group law, dilations, gauge
norm, horizontal vector fields and subLaplacian are the standard ones for
the symplectic matrix J = [[0, -I], [I, 0]].  J is never materialized:
(Jx)_j = -x_{n+j} for j < n and (Jx)_{n+j} = x_j, by index arithmetic.

All derivative-based operators are evaluated through the jet engine, so
first/second/third derivatives are exact to machine precision.  Every
operation is a pure function of its inputs; values are immutable after
construction and safe to use from many threads.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InvalidInputError, SingularPointError
from .jets import Jet, jet_space

# Floor for the uniform relative-error metric |a-b| / max(|a|,|b|,floor);
# the identities checked here span many orders of magnitude in the gauge.
REL_FLOOR = 1e-300


def rel_err(a, b, scale=None):
    """|a-b| / max(|a|, |b|, scale, REL_FLOOR), elementwise."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    denom = np.maximum(np.abs(a), np.abs(b))
    if scale is not None:
        denom = np.maximum(denom, scale)
    return np.abs(a - b) / np.maximum(denom, REL_FLOOR)


def jx(x: np.ndarray) -> np.ndarray:
    """Apply the symplectic matrix by index swap/negation.
    Works on shape (2n,) or batched (2n, ...)."""
    n = x.shape[0] // 2
    out = np.empty_like(x)
    out[:n] = -x[n:]
    out[n:] = x[:n]
    return out


# --------------------------------------------------------------------------
# points and group operations
# --------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class GroupPoint:
    """A point (x, t) of H^n; x has exactly 2n entries.  The homogeneous
    dimension Q = 2n + 2 is derived, never stored."""

    n: int
    x: np.ndarray
    t: float

    def __eq__(self, other):
        return (
            isinstance(other, GroupPoint)
            and self.n == other.n
            and bool(np.all(self.x == other.x))
            and self.t == other.t
        )

    def __post_init__(self):
        if self.n < 1:
            raise InvalidInputError(f"n must be a positive integer, got {self.n}")
        x = np.asarray(self.x, dtype=float)
        if x.shape != (2 * self.n,):
            raise InvalidInputError(
                f"x must have exactly {2 * self.n} entries, got shape {x.shape}"
            )
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "t", float(self.t))

    @property
    def Q(self) -> int:
        return 2 * self.n + 2

    def coords(self) -> list:
        return [*self.x, self.t]


def origin(n: int) -> GroupPoint:
    return GroupPoint(n, np.zeros(2 * n), 0.0)


def group_mul(a: GroupPoint, b: GroupPoint) -> GroupPoint:
    """(x,t) o (x',t') = (x + x', t + t' + 2<Jx, x'>)."""
    if a.n != b.n:
        raise InvalidInputError(f"dimension mismatch: n={a.n} vs n={b.n}")
    return GroupPoint(a.n, a.x + b.x, a.t + b.t + 2.0 * float(jx(a.x) @ b.x))


def group_inv(a: GroupPoint) -> GroupPoint:
    return GroupPoint(a.n, -a.x, -a.t)


def dilate(lam: float, a: GroupPoint) -> GroupPoint:
    """Anisotropic dilation (x, t) -> (lam x, lam^2 t)."""
    if not lam > 0.0:
        raise InvalidInputError(f"dilation parameter must be positive, got {lam}")
    return GroupPoint(a.n, lam * a.x, lam * lam * a.t)


# --------------------------------------------------------------------------
# scalar fields: one evaluation contract for plain numbers and for jets
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class ScalarField:
    """A scalar quantity on H^n.  fn maps the list of coordinate objects
    [x_1, ..., x_2n, t] (floats, arrays or seed Jets) to the field value in
    the same arithmetic; evaluating on seed jets yields the field's jet."""

    name: str
    fn: object

    def __call__(self, coords):
        return self.fn(coords)


def coord_seeds(x, t, order: int) -> list:
    """Seed jets of the 2n+1 coordinates at (x, t); x may be batched
    with shape (2n, B) and t with shape (B,)."""
    x = np.asarray(x, dtype=float)
    sp = jet_space(x.shape[0] + 1, order)
    seeds = [Jet.seed(sp, v, x[v]) for v in range(x.shape[0])]
    seeds.append(Jet.seed(sp, x.shape[0], t))
    return seeds


def field_jet(f: ScalarField, a: GroupPoint, order: int) -> Jet:
    return f(coord_seeds(a.x, a.t, order))


def field_value(f: ScalarField, a: GroupPoint) -> float:
    return float(f(a.coords()))


def _square_norm(xs):
    out = xs[0] * xs[0]
    for c in xs[1:]:
        out = out + c * c
    return out


def _gauge_quartic(coords):
    """|x|^4 + t^2 from coordinate objects."""
    xs, t = coords[:-1], coords[-1]
    s = _square_norm(xs)
    return s * s + t * t


def gauge(a):
    """Gauge norm rho = (|x|^4 + t^2)^(1/4).

    Accepts a GroupPoint (returns a float) or the list of coordinate
    objects/Jets (returns the matching object; jet evaluation at the group
    origin raises SingularPointError since rho is not smooth there)."""
    if isinstance(a, GroupPoint):
        return float(_gauge_quartic(a.coords()) ** 0.25)
    return _gauge_quartic(a) ** 0.25


gauge_field = ScalarField("gauge", lambda coords: _gauge_quartic(coords) ** 0.25)


def fundamental_field() -> ScalarField:
    """rho^(2-Q), harmonic for the subLaplacian away from the pole.
    The ambient index n is inferred from the number of coordinates."""

    def fn(coords):
        n = (len(coords) - 1) // 2
        return _gauge_quartic(coords) ** ((2 - (2 * n + 2)) / 4.0)

    return ScalarField("fundamental_solution", fn)


def weight_field(alpha: float) -> ScalarField:
    """The weight |x|^2 rho^(alpha-4); for alpha = 4 it reduces to the
    polynomial |x|^2, smooth everywhere."""
    alpha = float(alpha)

    def fn(coords):
        s = _square_norm(coords[:-1])
        if alpha == 4.0:
            return s
        return s * _gauge_quartic(coords) ** ((alpha - 4.0) / 4.0)

    return ScalarField(f"weight(alpha={alpha})", fn)


def candidate_u(alpha: float, R: float) -> ScalarField:
    """(rho^alpha - R^alpha)/alpha: the gauge-ball solution with
    vanishing boundary value on rho = R."""
    if not alpha > 0.0:
        raise InvalidInputError(f"alpha must be positive, got {alpha}")
    if not R > 0.0:
        raise InvalidInputError(f"R must be positive, got {R}")
    alpha = float(alpha)
    Ra = float(R) ** alpha

    def fn(coords):
        return (_gauge_quartic(coords) ** (alpha / 4.0) - Ra) / alpha

    return ScalarField(f"u(alpha={alpha},R={R})", fn)


# --------------------------------------------------------------------------
# differential operators
# --------------------------------------------------------------------------


def horizontal_gradient_from_jet(jet: Jet, x: np.ndarray) -> np.ndarray:
    """(X_1 f, ..., X_2n f) from an order >= 1 jet; X_j = d_{x_j} + 2(Jx)_j d_t."""
    g = jet.gradient()
    return g[:-1] + 2.0 * jx(np.asarray(x, dtype=float)) * g[-1]


def horizontal_gradient(f: ScalarField, a: GroupPoint) -> np.ndarray:
    return horizontal_gradient_from_jet(field_jet(f, a, 1), a.x)


def sublaplacian_from_jet(jet: Jet, x: np.ndarray):
    """Delta_H f = Delta_x f + 4|x|^2 f_tt + 4 <Jx, grad_x f_t> from an
    order >= 2 jet."""
    x = np.asarray(x, dtype=float)
    d = x.shape[0]
    out = jet.second(d, d) * 4.0 * (x * x).sum(axis=0)
    J = jx(x)
    for j in range(d):
        out = out + jet.second(j, j) + 4.0 * J[j] * jet.second(j, d)
    return out


def sublaplacian(f: ScalarField, a: GroupPoint) -> float:
    return float(sublaplacian_from_jet(field_jet(f, a, 2), a.x))


def sublaplacian_via_fields(f: ScalarField, a: GroupPoint) -> float:
    """sum_j X_j(X_j f), composing first-order vector-field applications
    on an order-2 jet.  Must agree with the explicit coefficient formula."""
    jet = field_jet(f, a, 2)
    sp = jet.space
    d = 2 * a.n
    seeds = [Jet.seed(sp, v, c) for v, c in enumerate(a.coords())]
    ft = jet.derivative(d)
    out = 0.0
    for j in range(d):
        jxj = -seeds[a.n + j] if j < a.n else seeds[j - a.n]
        xjf = jet.derivative(j) + 2.0 * jxj * ft
        g = xjf.gradient()
        out += float(g[j] + 2.0 * jx(a.x)[j] * g[-1])
    return out


def z_field(f: ScalarField, a: GroupPoint) -> float:
    """Z f = sum_j x_j d_{x_j} f + 2 t d_t f, the generator of the
    dilations; equals sum_j x_j X_j f + 2 t T f."""
    return float(z_field_from_jet(field_jet(f, a, 1), a.x, a.t))


def z_field_from_jet(jet: Jet, x: np.ndarray, t):
    g = jet.gradient()
    x = np.asarray(x, dtype=float)
    return (x * g[:-1]).sum(axis=0) + 2.0 * np.asarray(t) * g[-1]


# --------------------------------------------------------------------------
# the weight and its closed-form derivatives
# --------------------------------------------------------------------------


def weight_f(alpha: float, a: GroupPoint) -> float:
    """|x|^2 rho^(alpha-4); exact |x|^2 (origin included) when alpha = 4."""
    _check_alpha(alpha)
    s = float(a.x @ a.x)
    if alpha == 4.0:
        return s
    rho = gauge(a)
    if rho == 0.0:
        raise SingularPointError("weight is singular at the group origin for alpha < 4")
    return s * rho ** (alpha - 4.0)


@dataclass(frozen=True)
class WeightDerivatives:
    """Closed forms of the weight's derivatives at one point."""

    grad_h: np.ndarray
    grad_h_norm_sq: float
    t_deriv: float
    laplacian: float


def _check_alpha(alpha: float):
    if not 0.0 < alpha <= 4.0:
        raise InvalidInputError(f"alpha must lie in (0, 4], got {alpha}")


def closed_weight_derivatives(alpha: float, x: np.ndarray, t) -> WeightDerivatives:
    """Batched closed forms of the weight's derivatives; x may have shape
    (2n,) or (2n, B), t a matching scalar or (B,)."""
    _check_alpha(alpha)
    x = np.asarray(x, dtype=float)
    t = np.asarray(t, dtype=float)
    Q = x.shape[0] + 2
    s = (x * x).sum(axis=0)
    if alpha == 4.0:
        # All rho-powers collapse; exact even at the origin.
        zero = np.zeros_like(s)
        return WeightDerivatives(2.0 * x, 4.0 * s, zero, zero + 2.0 * (Q - 2.0))
    rho = (s * s + t * t) ** 0.25
    if np.any(rho == 0.0):
        raise SingularPointError("weight derivatives are singular at the group origin")
    ra4 = rho ** (alpha - 4.0)
    ra8 = rho ** (alpha - 8.0)
    grad = 2.0 * x * ra4 + (alpha - 4.0) * s * ra8 * (x * s + jx(x) * t)
    norm_sq = 4.0 * s * rho ** (2 * alpha - 8.0) + alpha * (alpha - 4.0) * s**3 * rho ** (
        2 * alpha - 12.0
    )
    t_deriv = 0.5 * (alpha - 4.0) * s * ra8 * t
    lap = 2.0 * (Q - 2.0) * ra4 + (alpha - 4.0) * (Q + alpha - 2.0) * s * s * ra8
    return WeightDerivatives(grad, norm_sq, t_deriv, lap)


def weight_f_closed_derivatives(alpha: float, a: GroupPoint) -> WeightDerivatives:
    """The four closed forms: horizontal gradient, its squared norm, the
    t-derivative, and the subLaplacian of the weight."""
    d = closed_weight_derivatives(alpha, a.x, a.t)
    return WeightDerivatives(
        d.grad_h, float(d.grad_h_norm_sq), float(d.t_deriv), float(d.laplacian)
    )


def jet_weight_derivatives(alpha: float, x: np.ndarray, t) -> WeightDerivatives:
    """Same record computed from the order-2 jet of the weight: the
    independent oracle for the closed forms.  Batched like the closed form."""
    _check_alpha(alpha)
    jet = weight_field(alpha)(coord_seeds(x, t, 2))
    grad = horizontal_gradient_from_jet(jet, x)
    return WeightDerivatives(
        grad,
        (grad * grad).sum(axis=0),
        jet.gradient()[-1],
        sublaplacian_from_jet(jet, x),
    )


def weight_f_jet_derivatives(alpha: float, a: GroupPoint) -> WeightDerivatives:
    d = jet_weight_derivatives(alpha, a.x, a.t)
    return WeightDerivatives(
        d.grad_h, float(d.grad_h_norm_sq), float(d.t_deriv), float(d.laplacian)
    )
