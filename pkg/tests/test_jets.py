"""Jet engine: exact truncated-Taylor arithmetic."""

import numpy as np
import pytest

from heis_overdet.errors import InvalidInputError, SingularPointError
from heis_overdet.jets import Jet, jet_space


def seeds_at(values, order):
    sp = jet_space(len(values), order)
    return Jet.seeds(sp, values)


def test_polynomial_derivatives_bitwise():
    # integer-coefficient polynomial of degree 3 at integer points: every
    # intermediate is exactly representable, so jets match hand-coded
    # derivatives bitwise
    x, y, z = seeds_at([2.0, 3.0, 5.0], 3)
    f = x * x * y + z * z * z - 4.0 * x * y * z + 7.0
    xv, yv, zv = 2.0, 3.0, 5.0
    assert f.value == xv * xv * yv + zv**3 - 4 * xv * yv * zv + 7.0
    assert f.deriv((0,)) == 2 * xv * yv - 4 * yv * zv
    assert f.deriv((1,)) == xv * xv - 4 * xv * zv
    assert f.deriv((2,)) == 3 * zv * zv - 4 * xv * yv
    assert f.deriv((0, 0)) == 2 * yv
    assert f.deriv((0, 1)) == 2 * xv - 4 * zv
    assert f.deriv((1, 2)) == -4 * xv
    assert f.deriv((0, 0, 1)) == 2.0
    assert f.deriv((2, 2, 2)) == 6.0
    assert f.deriv((0, 1, 2)) == -4.0


def test_random_polynomial_vs_analytic():
    rng = np.random.default_rng(3)
    for _ in range(25):
        a, b, c = rng.integers(-4, 5, size=3).astype(float)
        x0, y0 = rng.integers(-3, 4, size=2).astype(float)
        x, y = seeds_at([x0, y0], 3)
        f = a * x * x * x + b * x * y + c * y * y
        assert f.deriv((0, 0, 0)) == 6 * a
        assert f.deriv((0, 0)) == 6 * a * x0
        assert f.deriv((0, 1)) == b
        assert f.deriv((1, 1)) == 2 * c
        assert f.deriv((1,)) == b * x0 + 2 * c * y0


def test_mixed_partial_storage_is_symmetric():
    sp = jet_space(4, 3)
    x = Jet.seeds(sp, [1.0, 2.0, 3.0, 4.0])
    f = x[0] * x[1] * x[2] + x[3] * x[3] * x[1]
    for multi in [(0, 1), (0, 1, 2), (1, 3, 3)]:
        for perm in [multi, multi[::-1]]:
            assert f.deriv(perm) == f.deriv(multi)


def test_cross_order_consistency():
    rng = np.random.default_rng(11)
    vals = rng.normal(size=3)

    def field(coords):
        return (coords[0] * coords[0] + coords[1] * coords[1] + coords[2] * coords[2] + 3.0) ** 0.3

    full = field(seeds_at(vals, 3))
    for order in (1, 2):
        low = field(seeds_at(vals, order))
        np.testing.assert_allclose(low.coeff, full.truncated(order).coeff, rtol=1e-15)


@pytest.mark.parametrize("p", [0.25, -1.3, 2.7, 0.5])
def test_real_power_matches_analytic(p):
    x, = seeds_at([1.7], 3)
    g = (x * x + 2.0) ** p
    v = 1.7
    base = v * v + 2.0
    assert abs(g.value - base**p) < 1e-14 * base**p
    d1 = p * base ** (p - 1) * 2 * v
    d2 = p * (p - 1) * base ** (p - 2) * (2 * v) ** 2 + p * base ** (p - 1) * 2
    d3 = (
        p * (p - 1) * (p - 2) * base ** (p - 3) * (2 * v) ** 3
        + 3 * p * (p - 1) * base ** (p - 2) * (2 * v) * 2
    )
    assert abs(g.deriv((0,)) - d1) < 1e-12 * max(abs(d1), 1)
    assert abs(g.deriv((0, 0)) - d2) < 1e-12 * max(abs(d2), 1)
    assert abs(g.deriv((0, 0, 0)) - d3) < 1e-11 * max(abs(d3), 1)


def test_integer_power_and_reciprocal():
    x, y = seeds_at([2.0, -3.0], 2)
    f = (x + y) ** 3
    g = (x + y) * (x + y) * (x + y)
    np.testing.assert_array_equal(f.coeff, g.coeff)
    r = (x * x + y * y).reciprocal()
    assert abs(r.value - 1.0 / 13.0) < 1e-16
    # d/dx (x^2+y^2)^-1 = -2x/(x^2+y^2)^2
    assert abs(r.deriv((0,)) + 4.0 / 169.0) < 1e-16


def test_division_and_sqrt():
    x, y = seeds_at([1.2, 0.7], 3)
    q = x / y
    assert abs(q.value - 1.2 / 0.7) < 1e-15
    assert abs(q.deriv((1,)) + 1.2 / 0.7**2) < 1e-14
    s = (x * x + y * y).sqrt()
    r = np.hypot(1.2, 0.7)
    assert abs(s.value - r) < 1e-15
    assert abs(s.deriv((0,)) - 1.2 / r) < 1e-14


def test_exp_log_inverse_each_other():
    x, = seeds_at([0.8], 3)
    f = (x * x + 0.5).log().exp()
    g = x * x + 0.5
    np.testing.assert_allclose(f.coeff, g.coeff, rtol=5e-15, atol=5e-16)


def test_derivative_operator_reduces_order():
    x, y = seeds_at([1.5, -2.0], 3)
    f = x * x * y
    fx = f.derivative(0)
    assert fx.order == 2
    assert fx.value == 2 * 1.5 * -2.0
    assert fx.deriv((0,)) == 2 * -2.0
    assert fx.deriv((0, 1)) == 2.0


def test_batched_matches_scalar():
    rng = np.random.default_rng(5)
    xs = rng.normal(size=(3, 17))

    def field(coords):
        return (coords[0] * coords[0] + coords[1] * coords[1] * coords[2] * coords[2] + 2.0) ** 0.5

    sp = jet_space(3, 2)
    batched = field([Jet.seed(sp, v, xs[v]) for v in range(3)])
    for i in range(17):
        single = field([Jet.seed(sp, v, xs[v, i]) for v in range(3)])
        np.testing.assert_array_equal(batched.coeff[:, i], single.coeff)


def test_singular_bases_raise():
    x, = seeds_at([0.0], 2)
    with pytest.raises(SingularPointError):
        (x * x) ** 0.25
    with pytest.raises(SingularPointError):
        x.sqrt()
    with pytest.raises(SingularPointError):
        x.reciprocal()
    with pytest.raises(SingularPointError):
        x.log()
    y, = seeds_at([-2.0], 2)
    with pytest.raises(SingularPointError):
        y ** 0.5


def test_invalid_orders_rejected():
    with pytest.raises(InvalidInputError):
        jet_space(3, 4)
    with pytest.raises(InvalidInputError):
        jet_space(0, 2)
    x, = seeds_at([1.0], 1)
    with pytest.raises(InvalidInputError):
        x.second(0, 0)
