"""Truncated multivariate Taylor arithmetic ("jets").

A jet of order m in d variables stores every mixed partial derivative of a
scalar quantity up to order m at a point, in the scaled Taylor-coefficient
convention c_beta = (d^beta f)/beta!.  Each unordered multi-index is stored
once, in a dense graded-lexicographic layout, so mixed-partial symmetry
holds by construction.  Arithmetic is exact truncated-Taylor arithmetic:
composing jets of a function with the seed jets of the coordinates yields
the true derivatives of the composition up to the stored order.

Coefficient arrays may carry trailing batch axes, so one jet object can
evaluate a field at many points simultaneously; all operations broadcast
over the batch.

Orders are capped at 3 and the variable count stays <= 9 in this package,
so the dense layout (C(d+3,3) coefficients) beats any sparse bookkeeping.
"""

from __future__ import annotations

import functools
import itertools
import math

import numpy as np

from .errors import InvalidInputError, SingularPointError

MAX_ORDER = 3


def _num_coeffs(num_vars: int, order: int) -> int:
    return math.comb(num_vars + order, order)


@functools.lru_cache(maxsize=None)
def jet_space(num_vars: int, order: int) -> "JetSpace":
    return JetSpace(num_vars, order)


class JetSpace:
    """Layout and precomputed index tables for jets of a fixed
    (num_vars, order) signature.  Obtain instances through jet_space()
    so the tables are built once per signature."""

    def __init__(self, num_vars: int, order: int):
        if num_vars < 1:
            raise InvalidInputError(f"num_vars must be >= 1, got {num_vars}")
        if not 0 <= order <= MAX_ORDER:
            raise InvalidInputError(f"order must be in 0..{MAX_ORDER}, got {order}")
        self.num_vars = num_vars
        self.order = order

        # Monomials as sorted variable tuples, graded-lex: degree first,
        # then lexicographic within each degree.
        combos = []
        for deg in range(order + 1):
            combos.extend(itertools.combinations_with_replacement(range(num_vars), deg))
        self.combos = combos
        self.index = {c: i for i, c in enumerate(combos)}
        self.ncoeff = len(combos)
        # ncoeff prefix per order, for truncation.
        self.ncoeff_upto = [_num_coeffs(num_vars, m) for m in range(order + 1)]

        # beta! per stored monomial: derivative = beta! * coefficient.
        fact = np.ones(self.ncoeff)
        for i, c in enumerate(combos):
            f = 1.0
            for v in set(c):
                f *= math.factorial(c.count(v))
            fact[i] = f
        self.deriv_factor = fact

        # Truncated-product table: every ordered split of a monomial into
        # two stored monomials, sorted by the output index so the product
        # reduces with a single add.reduceat.
        triples = []
        for i1, c1 in enumerate(combos):
            for i2, c2 in enumerate(combos):
                if len(c1) + len(c2) <= order:
                    k = self.index[tuple(sorted(c1 + c2))]
                    triples.append((k, i1, i2))
        triples.sort()
        ks = np.array([t[0] for t in triples], dtype=np.intp)
        self.mul_i = np.array([t[1] for t in triples], dtype=np.intp)
        self.mul_j = np.array([t[2] for t in triples], dtype=np.intp)
        # Every output monomial arises at least from (1, monomial), so the
        # segments enumerate 0..ncoeff-1 in order.
        self.mul_starts = np.flatnonzero(np.r_[1, np.diff(ks)]).astype(np.intp)
        assert len(self.mul_starts) == self.ncoeff

        # d/dx_v as a gather: coefficient of gamma in d_v f is
        # (gamma_v + 1) * c_{gamma + e_v}.
        self.deriv_src = []
        self.deriv_fac = []
        if order >= 1:
            lower = combos[: self.ncoeff_upto[order - 1]]
            for v in range(num_vars):
                src = np.array(
                    [self.index[tuple(sorted(c + (v,)))] for c in lower], dtype=np.intp
                )
                fac = np.array([c.count(v) + 1.0 for c in lower])
                self.deriv_src.append(src)
                self.deriv_fac.append(fac)

    def lower(self, order: int) -> "JetSpace":
        return jet_space(self.num_vars, order)

    def __repr__(self):
        return f"JetSpace(num_vars={self.num_vars}, order={self.order})"


def _as_batched(coeff: np.ndarray, batch: tuple) -> np.ndarray:
    target = (coeff.shape[0],) + batch
    if coeff.shape == target:
        return coeff
    c = coeff.reshape(coeff.shape + (1,) * (len(target) - coeff.ndim))
    return np.ascontiguousarray(np.broadcast_to(c, target))


class Jet:
    """Dense truncated Taylor expansion; immutable by convention."""

    __slots__ = ("space", "coeff")

    # Make ndarray <op> Jet defer to the reflected Jet operators instead of
    # broadcasting elementwise into an object array.
    __array_ufunc__ = None

    def __init__(self, space: JetSpace, coeff: np.ndarray):
        self.space = space
        self.coeff = coeff

    # ---------------------------------------------------------------- setup

    @staticmethod
    def constant(space: JetSpace, value) -> "Jet":
        value = np.asarray(value, dtype=float)
        coeff = np.zeros((space.ncoeff,) + value.shape)
        coeff[0] = value
        return Jet(space, coeff)

    @staticmethod
    def seed(space: JetSpace, var: int, value) -> "Jet":
        """Jet of the coordinate function x_var at the point value."""
        if not 0 <= var < space.num_vars:
            raise InvalidInputError(f"variable index {var} out of range")
        value = np.asarray(value, dtype=float)
        coeff = np.zeros((space.ncoeff,) + value.shape)
        coeff[0] = value
        if space.order >= 1:
            coeff[1 + var] = 1.0
        return Jet(space, coeff)

    @staticmethod
    def seeds(space: JetSpace, values) -> list:
        return [Jet.seed(space, v, values[v]) for v in range(space.num_vars)]

    # ------------------------------------------------------------ accessors

    @property
    def batch(self) -> tuple:
        return self.coeff.shape[1:]

    @property
    def order(self) -> int:
        return self.space.order

    @property
    def value(self):
        return self.coeff[0]

    def gradient(self) -> np.ndarray:
        if self.order < 1:
            raise InvalidInputError("gradient needs a jet of order >= 1")
        return self.coeff[1 : 1 + self.space.num_vars]

    def second(self, i: int, j: int):
        """Mixed second derivative d^2 f / dx_i dx_j."""
        if self.order < 2:
            raise InvalidInputError("second derivatives need order >= 2")
        c = self.space.index[tuple(sorted((i, j)))]
        return self.coeff[c] * (2.0 if i == j else 1.0)

    def deriv(self, multi: tuple):
        """Mixed partial derivative for an arbitrary variable tuple."""
        c = tuple(sorted(multi))
        if len(c) > self.order:
            raise InvalidInputError("derivative order exceeds jet order")
        idx = self.space.index[c]
        return self.coeff[idx] * self.space.deriv_factor[idx]

    def truncated(self, order: int) -> "Jet":
        if order > self.order:
            raise InvalidInputError("cannot truncate upwards")
        if order == self.order:
            return self
        sp = self.space.lower(order)
        return Jet(sp, self.coeff[: sp.ncoeff])

    def derivative(self, var: int) -> "Jet":
        """Jet of d f / dx_var, one order lower."""
        if self.order < 1:
            raise InvalidInputError("cannot differentiate an order-0 jet")
        sp = self.space.lower(self.order - 1)
        src = self.space.deriv_src[var]
        fac = self.space.deriv_fac[var].reshape((-1,) + (1,) * len(self.batch))
        return Jet(sp, self.coeff[src] * fac)

    # ------------------------------------------------------------ arithmetic

    def _align(self, other: "Jet"):
        if self.space.num_vars != other.space.num_vars:
            raise InvalidInputError("jets live over different variable sets")
        m = min(self.order, other.order)
        return self.truncated(m), other.truncated(m)

    def __add__(self, other):
        if isinstance(other, Jet):
            a, b = self._align(other)
            return Jet(a.space, a.coeff + b.coeff)
        other = np.asarray(other, dtype=float)
        batch = np.broadcast_shapes(self.batch, other.shape)
        coeff = _as_batched(self.coeff, batch).copy()
        coeff[0] += other
        return Jet(self.space, coeff)

    __radd__ = __add__

    def __neg__(self):
        return Jet(self.space, -self.coeff)

    def __sub__(self, other):
        return self + (-other if isinstance(other, Jet) else -np.asarray(other, dtype=float))

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, other):
        if isinstance(other, Jet):
            a, b = self._align(other)
            sp = a.space
            batch = np.broadcast_shapes(a.batch, b.batch)
            ca = _as_batched(a.coeff, batch)
            cb = _as_batched(b.coeff, batch)
            prod = ca[sp.mul_i] * cb[sp.mul_j]
            return Jet(sp, np.add.reduceat(prod, sp.mul_starts, axis=0))
        return Jet(self.space, self.coeff * np.asarray(other, dtype=float))

    __rmul__ = __mul__

    def __truediv__(self, other):
        if isinstance(other, Jet):
            return self * other.reciprocal()
        return self * (1.0 / np.asarray(other, dtype=float))

    def __rtruediv__(self, other):
        return self.reciprocal() * other

    def compose(self, derivs) -> "Jet":
        """Compose with a univariate map given its derivative values
        [phi(v), phi'(v), ..., phi^(m)(v)] at v = self.value."""
        if len(derivs) < self.order + 1:
            raise InvalidInputError("need one derivative value per jet order")
        w = Jet(self.space, self.coeff.copy())
        w.coeff[0] = 0.0
        out = Jet.constant(self.space, derivs[self.order] / math.factorial(self.order))
        for k in range(self.order - 1, -1, -1):
            out = out * w + np.asarray(derivs[k], dtype=float) / math.factorial(k)
        return out

    def exp(self) -> "Jet":
        e = np.exp(self.value)
        return self.compose([e] * (self.order + 1))

    def log(self) -> "Jet":
        v = self.value
        if np.any(v <= 0.0):
            raise SingularPointError("log of a jet with non-positive value")
        derivs = [np.log(v), 1.0 / v, -1.0 / v**2, 2.0 / v**3][: self.order + 1]
        return self.compose(derivs)

    def sqrt(self) -> "Jet":
        v = self.value
        if np.any(v <= 0.0):
            raise SingularPointError("sqrt of a jet with non-positive value")
        r = np.sqrt(v)
        derivs = [r, 0.5 / r, -0.25 / (r * v), 0.375 / (r * v * v)][: self.order + 1]
        return self.compose(derivs)

    def reciprocal(self) -> "Jet":
        v = self.value
        if np.any(v == 0.0):
            raise SingularPointError("reciprocal of a jet with zero value")
        derivs = [1.0 / v, -1.0 / v**2, 2.0 / v**3, -6.0 / v**4][: self.order + 1]
        return self.compose(derivs)

    def __pow__(self, p):
        if isinstance(p, Jet):
            raise InvalidInputError("jet exponents are not supported")
        if float(p) == int(p):
            k = int(p)
            if k < 0:
                return self.reciprocal() ** (-k)
            out = Jet.constant(self.space, np.ones(self.batch) if self.batch else 1.0)
            base = self
            while k:
                if k & 1:
                    out = out * base
                base = base * base if k > 1 else base
                k >>= 1
            return out
        # Real exponent: exp/log composition, positive base required.
        if np.any(self.value <= 0.0):
            raise SingularPointError("real power of a jet with non-positive value")
        return (self.log() * float(p)).exp()

    def __repr__(self):
        return f"Jet(d={self.space.num_vars}, order={self.order}, batch={self.batch})"
