"""Reduced coordinates: the operator, the matrix bundle, the auxiliary
scalar v, and the sum-of-squares identities."""

import numpy as np
import pytest

from heis_overdet import heisenberg as hg
from heis_overdet import reduced as rd
from heis_overdet.errors import InvalidInputError, SingularPointError, SymmetryViolationError
from heis_overdet.heisenberg import rel_err
from heis_overdet.jets import Jet, jet_space


def sample_point(n, rng, rho_range=(0.1, 10.0), floor=0.01, t_ratio=5.0):
    rho = np.exp(rng.uniform(np.log(rho_range[0]), np.log(rho_range[1])))
    tau = rng.uniform(-t_ratio, t_ratio)
    sigma = rho * rho / np.sqrt(1.0 + tau * tau)
    w = floor + (1.0 - n * floor) * rng.dirichlet(np.ones(n))
    return rd.ReducedPoint(n, sigma * w, tau * sigma)


def pde_solution_jet(n, alpha, p, rng, order=3, cylindrical=False):
    """u_alpha plus a random combination of harmonic polynomials: an exact
    solution of the reduced equation."""
    seeds = rd.reduced_seeds(p.s, p.t, order)
    basis = rd.cylindrical_harmonic_basis(n) if cylindrical else rd.harmonic_basis(n)
    U = rd.u_alpha_reduced(alpha, 1.0)(seeds)
    for H in basis:
        U = U + rng.uniform(-1.0, 1.0) * H(seeds)
    return U


def master_scale(lhs, rhs, M, p, alpha):
    F = p.sigma * (p.sigma**2 + p.t**2) ** ((alpha - 4.0) / 4.0)
    return max(
        abs(lhs), abs(rhs), float((M * M).sum()),
        F * F * (1.0 + (float(p.s @ p.s) + p.t**2) ** 2),
    )


# ------------------------------------------------------------------- lifting


def test_lift_gauge_power():
    rng = np.random.default_rng(0)
    for n in (1, 2, 3):
        alpha = 2.5
        f = hg.ScalarField("rho^a/a", lambda c: hg._gauge_quartic(c) ** (alpha / 4.0) / alpha)
        for _ in range(10):
            p = sample_point(n, rng)
            U = rd.lift_to_reduced(f, p)
            expect = 0.5 * p.sigma * (p.sigma**2 + p.t**2) ** ((alpha - 4.0) / 4.0)
            for j in range(n):
                assert rel_err(float(U.gradient()[j]), expect) < 1e-12


def test_lift_coordinate_fields():
    rng = np.random.default_rng(1)
    n = 2
    p = sample_point(n, rng)
    t_field = hg.ScalarField("t", lambda c: c[-1] + 0.0 * c[0])
    U = rd.lift_to_reduced(t_field, p)
    assert float(U.gradient()[n]) == 1.0
    assert np.all(np.asarray(U.gradient()[:n]) == 0.0)
    sq = hg.ScalarField("|x|^2", lambda c: sum(ci * ci for ci in c[:-1]) + 0.0 * c[-1])
    U2 = rd.lift_to_reduced(sq, p)
    for j in range(n):
        assert abs(float(U2.gradient()[j]) - 1.0) < 1e-12


def test_lift_rejects_asymmetric_field():
    rng = np.random.default_rng(2)
    p = sample_point(2, rng)
    bad = hg.ScalarField("x1", lambda c: c[0] + 0.0 * c[-1])
    with pytest.raises(SymmetryViolationError):
        rd.lift_to_reduced(bad, p)


def test_lift_needs_positive_s():
    p = rd.ReducedPoint(2, [0.0, 1.0], 0.5)
    f = hg.ScalarField("|x|^2", lambda c: sum(ci * ci for ci in c[:-1]) + 0.0 * c[-1])
    with pytest.raises(SingularPointError):
        rd.lift_to_reduced(f, p)


# ------------------------------------------------------------ reduced operator


def test_reduced_operator_closed_forms():
    rng = np.random.default_rng(3)
    n = 3
    p = sample_point(n, rng)
    seeds = rd.reduced_seeds(p.s, p.t, 2)

    def radial(c):
        out = c[-1] * c[-1]
        for k in range(n):
            out = out - 0.5 * c[k] * c[k]
        return out

    # L(t^2) = 2 sigma and L(s_k^2) = 4 s_k makes this combination harmonic
    assert abs(rd.reduced_operator(rd.ReducedField("r", radial)(seeds), p)) < 1e-13 * (
        p.sigma + abs(p.t)
    ) ** 2
    diff = rd.ReducedField("s1-s2", lambda c: c[0] - c[1])
    assert rd.reduced_operator(diff(seeds), p) == 0.0


def test_reduced_operator_on_u_alpha():
    rng = np.random.default_rng(4)
    for n, alpha in [(1, 2.0), (2, 3.0), (4, 0.5)]:
        for _ in range(20):
            p = sample_point(n, rng)
            U = rd.reduced_jet(rd.u_alpha_reduced(alpha, 1.0), p, 2)
            got = rd.reduced_operator(U, p)
            expect = (2 * n + alpha) / 4.0 * p.sigma * (p.sigma**2 + p.t**2) ** (
                (alpha - 4.0) / 4.0
            )
            assert rel_err(got, expect) < 1e-12


def test_reduced_operator_is_quarter_sublaplacian():
    rng = np.random.default_rng(5)
    for n in (1, 2, 3):
        alpha = 3.0
        f = hg.candidate_u(alpha, 1.0)
        for _ in range(10):
            p = sample_point(n, rng)
            U = rd.lift_to_reduced(f, p)
            full_x = np.concatenate([np.sqrt(p.s), np.zeros(n)])
            a = hg.GroupPoint(n, full_x, p.t)
            assert rel_err(rd.reduced_operator(U, p), hg.sublaplacian(f, a) / 4.0) < 1e-11


# ------------------------------------------------------------- harmonic basis


def test_harmonic_basis_contents():
    b1 = [H.name for H in rd.harmonic_basis(1)]
    assert b1 == ["one", "t", "t^2-sum(s^2)/2"]
    b2 = [H.name for H in rd.harmonic_basis(2)]
    assert "s1-s2" in b2 and "t(s1-s2)" in b2


def test_harmonic_basis_annihilated():
    rng = np.random.default_rng(6)
    for n in (1, 2, 3, 4):
        basis = rd.harmonic_basis(n)
        for H in basis:
            for _ in range(100):
                p = sample_point(n, rng, rho_range=(0.2, 5.0))
                LH = rd.reduced_operator(rd.reduced_jet(H, p, 2), p)
                assert abs(LH) <= 1e-12 * max(1.0, p.sigma**2 + p.t**2)


def test_cylindrical_harmonic_basis_structure():
    rng = np.random.default_rng(7)
    for n in (1, 2, 3):
        for H in rd.cylindrical_harmonic_basis(n):
            p = sample_point(n, rng)
            U = rd.reduced_jet(H, p, 2)
            assert abs(rd.reduced_operator(U, p)) <= 1e-12 * max(1.0, p.sigma**2 + p.t**2)
            g = np.asarray(U.gradient()[:n], dtype=float)
            assert np.max(np.abs(g - g[0])) <= 1e-14 * max(1.0, np.max(np.abs(g)))


def test_degree_cap_enforced():
    with pytest.raises(InvalidInputError):
        rd.harmonic_basis(2, degree_cap=3)


# --------------------------------------------------------------- matrix bundle


def test_bundle_invariants():
    rng = np.random.default_rng(8)
    for n in (1, 2, 3):
        for alpha in (0.5, 2.0, 3.9, 4.0):
            p = sample_point(n, rng)
            U = pde_solution_jet(n, alpha, p, rng, order=2)
            b = rd.build_matrix_bundle(U, p, alpha)
            c = 2.0 * p.sigma / (p.sigma**2 + p.t**2) * (alpha - 4.0) / 4.0
            scale = np.max(np.abs(b.D2)) + np.max(np.abs(b.D1)) + 1e-300
            assert np.max(np.abs(b.M - (b.D2 - b.D1))) <= 1e-14 * scale
            assert np.max(np.abs(b.D1 - (b.E1 + c * b.E2))) <= 1e-14 * scale
            for mat in (b.D2, b.E1, b.E2, b.D1, b.M):
                np.testing.assert_array_equal(mat, mat.T)
            assert rel_err(b.trace_M_direct, b.trace_M_formula, scale=scale) < 1e-11


def test_trace_formula_random_jets():
    # the PDE-independent trace identity holds for arbitrary coefficients
    rng = np.random.default_rng(9)
    for n in (1, 2, 3, 4):
        sp = jet_space(n + 1, 2)
        for _ in range(50):
            p = sample_point(n, rng)
            seeds = rd.reduced_seeds(p.s, p.t, 2)
            U = Jet(sp, rng.uniform(-1, 1, size=sp.ncoeff))
            U = U + 0.0 * seeds[0]  # tie to the evaluation point
            b = rd.build_matrix_bundle(U, p, 3.3)
            scale = np.sqrt((b.D2**2).sum()) + np.sqrt((b.D1**2).sum())
            assert rel_err(b.trace_M_direct, b.trace_M_formula, scale=scale) < 1e-11


def test_bundle_zero_jet():
    p = rd.ReducedPoint(2, [0.4, 0.6], 0.3)
    sp = jet_space(3, 2)
    U = Jet.constant(sp, 0.0)
    b = rd.build_matrix_bundle(U, p, 2.0)
    for mat in (b.D2, b.E1, b.E2, b.M):
        np.testing.assert_array_equal(mat, np.zeros((3, 3)))


def test_bundle_equality_case():
    rng = np.random.default_rng(10)
    for n in (1, 2, 3):
        for alpha in (0.5, 2.0, 3.9):
            p = sample_point(n, rng, rho_range=(0.3, 3.0))
            U = rd.reduced_jet(rd.u_alpha_reduced(alpha, 1.0), p, 2)
            b = rd.build_matrix_bundle(U, p, alpha)
            mu = b.trace_M_direct / (n + 1)
            dev = np.max(np.abs(b.M - mu * np.eye(n + 1)))
            assert dev <= 1e-11 * max(abs(mu), np.max(np.abs(b.D2)), 1e-300)


def test_bundle_rejects_bad_points():
    sp = jet_space(3, 2)
    U = Jet.constant(sp, 1.0)
    with pytest.raises(InvalidInputError):
        rd._matrix_bundle(U, np.array([-0.1, 0.5]), 0.2, 2.0)
    with pytest.raises(SingularPointError):
        rd._matrix_bundle(U, np.array([0.0, 0.0]), 0.2, 2.0)


# ------------------------------------------------------------ frobenius deficit


def test_frobenius_deficit_identity_multiple():
    assert rd.frobenius_deficit(3.7 * np.eye(4)) == 0.0


def test_frobenius_deficit_rank_one():
    M = np.zeros((3, 3))
    M[0, 0] = 1.0
    assert abs(rd.frobenius_deficit(M) - 2.0 / 3.0) < 1e-15


def test_frobenius_deficit_random():
    rng = np.random.default_rng(11)
    for m in (2, 3, 5):
        for _ in range(50):
            A = rng.normal(size=(m, m))
            M = 0.5 * (A + A.T)
            d = rd.frobenius_deficit(M)
            assert d >= -1e-12 * (M * M).sum()
            centered = M - np.trace(M) / m * np.eye(m)
            assert rel_err(d, (centered * centered).sum(), scale=(M * M).sum()) < 1e-13


def test_frobenius_deficit_rejects_asymmetric():
    with pytest.raises(InvalidInputError):
        rd.frobenius_deficit(np.array([[0.0, 1.0], [0.0, 0.0]]))


# ------------------------------------------------------------------ p-function


def test_pfunction_constant_for_u_alpha():
    rng = np.random.default_rng(12)
    for n, alpha, R in [(1, 2.0, 1.0), (2, 3.5, 2.0), (3, 0.5, 1.0)]:
        for _ in range(30):
            p = sample_point(n, rng, rho_range=(0.1 * R, R))
            U = rd.reduced_jet(rd.u_alpha_reduced(alpha, R), p, 1)
            v = rd.pfunction(U, p, alpha)
            assert rel_err(v, R**alpha, scale=(p.sigma**2 + p.t**2) ** (alpha / 4.0)) < 1e-12


def test_pfunction_of_constant_field():
    p = rd.ReducedPoint(2, [0.5, 0.7], -0.4)
    sp = jet_space(3, 1)
    k = 1.7
    U = Jet.constant(sp, k)
    assert rd.pfunction(U, p, 3.0) == -3.0 * k
    assert rd.pfunction_g(U, p, 3.0) == 0.0


def test_pfunction_matches_full_space():
    rng = np.random.default_rng(13)
    for n, alpha in [(1, 2.0), (2, 3.0)]:
        f = hg.candidate_u(alpha, 1.0)
        for _ in range(20):
            p = sample_point(n, rng)
            U = rd.lift_to_reduced(f, p, order=1)
            v_reduced = rd.pfunction(U, p, alpha)
            x = np.concatenate([np.sqrt(p.s), np.zeros(n)])
            a = hg.GroupPoint(n, x, p.t)
            grad = hg.horizontal_gradient(f, a)
            v_full = float(grad @ grad) / hg.weight_f(alpha, a) - alpha * hg.field_value(f, a)
            assert rel_err(v_reduced, v_full) < 1e-11


def test_pfunction_axis_singularity():
    p = rd.ReducedPoint(2, [0.0, 0.0], 1.0)
    sp = jet_space(3, 1)
    with pytest.raises(SingularPointError):
        rd.pfunction(Jet.constant(sp, 1.0), p, 2.0)


def test_pfunction_g_accessor():
    rng = np.random.default_rng(14)
    p = sample_point(2, rng)
    U = pde_solution_jet(2, 3.0, p, rng, order=1)
    v = rd.pfunction(U, p, 3.0)
    g = rd.pfunction_g(U, p, 3.0)
    assert rel_err(g, (v + 3.0 * float(U.value)) / 4.0) < 1e-13


# ------------------------------------------------------- sum-of-squares RHS


def test_rhs_equality_case_vanishes():
    rng = np.random.default_rng(15)
    for n, variants in [(1, ["toric_n1", "cylindrical"]),
                        (2, ["toric_n2", "toric_general", "cylindrical"]),
                        (3, ["toric_general", "cylindrical"])]:
        for alpha in (0.5, 2.0, 3.9, 4.0):
            p = sample_point(n, rng, rho_range=(0.3, 3.0))
            U = rd.reduced_jet(rd.u_alpha_reduced(alpha, 1.0), p, 2)
            M = rd.build_matrix_bundle(U, p, alpha).M
            norm_m = float((M * M).sum())
            F = p.sigma * (p.sigma**2 + p.t**2) ** ((alpha - 4.0) / 4.0)
            sq_scale = F * F * (1.0 + (float(p.s @ p.s) + p.t**2) ** 2)
            for variant in variants:
                r = rd.rhs_sum_of_squares(variant, U, p, alpha)
                for name, val in r.terms.items():
                    # the deficit cancels at first order in rounding, the
                    # genuine squares at second order
                    bound = 1e-14 * norm_m if name == "matrix_deficit" else 1e-20 * sq_scale
                    assert abs(val) <= bound, (variant, name, val, bound)
                assert abs(r.total) <= 1e-11 * max(norm_m, sq_scale)


def test_rhs_alpha4_cylindrical_collapse():
    rng = np.random.default_rng(16)
    for n in (1, 2, 3):
        p = sample_point(n, rng)
        U = pde_solution_jet(n, 4.0, p, rng, order=2, cylindrical=True)
        r = rd.rhs_sum_of_squares("cylindrical", U, p, 4.0)
        assert r.terms["angular_momentum"] == 0.0
        if "pohozaev_square" in r.terms:
            assert r.terms["pohozaev_square"] == 0.0
        M = rd.build_matrix_bundle(U, p, 4.0).M
        Ws = float(U.gradient()[0])
        F4 = p.sigma
        expect = 2.0 * rd.frobenius_deficit(M) + (2 * n + 4.0) / (n + 1.0) * (Ws - 0.5 * F4) ** 2
        assert rel_err(r.total, expect, scale=float((M * M).sum())) < 1e-13


def test_rhs_tordue_is_magik_at_n2():
    rng = np.random.default_rng(17)
    for alpha in (0.5, 2.0, 3.0, 3.9, 4.0):
        for _ in range(40):
            p = sample_point(2, rng)
            U = pde_solution_jet(2, alpha, p, rng, order=2)
            a = rd.rhs_sum_of_squares("toric_n2", U, p, alpha).total
            b = rd.rhs_sum_of_squares("toric_general", U, p, alpha).total
            assert rel_err(a, b, scale=p.sigma**2) < 1e-11


def test_rhs_variant_compatibility():
    rng = np.random.default_rng(18)
    p = sample_point(2, rng)
    U = pde_solution_jet(2, 2.0, p, rng, order=2)
    with pytest.raises(InvalidInputError):
        rd.rhs_sum_of_squares("toric_n1", U, p, 2.0)
    p1 = sample_point(1, rng)
    U1 = pde_solution_jet(1, 2.0, p1, rng, order=2)
    with pytest.raises(InvalidInputError):
        rd.rhs_sum_of_squares("toric_general", U1, p1, 2.0)
    with pytest.raises(InvalidInputError):
        rd.rhs_sum_of_squares("no_such_variant", U, p, 2.0)


def test_rhs_cylindrical_needs_w_structure():
    rng = np.random.default_rng(19)
    p = sample_point(2, rng)
    U = pde_solution_jet(2, 2.0, p, rng, order=2)  # generic toric: U_1 != U_2
    seeds = rd.reduced_seeds(p.s, p.t, 2)
    U = U + 0.5 * (seeds[0] - seeds[1])
    with pytest.raises(InvalidInputError):
        rd.rhs_sum_of_squares("cylindrical", U, p, 2.0)


def test_rhs_nonnegative_terms_low_dim():
    # every named term of the n=1, n=2 and cylindrical variants is a
    # nonnegative multiple of a square for alpha in (0, 4]
    rng = np.random.default_rng(20)
    for n, variant in [(1, "toric_n1"), (2, "toric_n2"), (1, "cylindrical"),
                       (2, "cylindrical"), (3, "cylindrical"), (4, "cylindrical")]:
        for alpha in (0.5, 1.0, 2.0, 3.0, 3.9, 4.0):
            for _ in range(20):
                p = sample_point(n, rng)
                U = pde_solution_jet(n, alpha, p, rng, order=2,
                                     cylindrical=(variant == "cylindrical"))
                r = rd.rhs_sum_of_squares(variant, U, p, alpha)
                M = rd.build_matrix_bundle(U, p, alpha).M
                scale = max(float((M * M).sum()), 1e-300)
                for name, val in r.terms.items():
                    assert val >= -1e-12 * scale, (variant, alpha, name, val)


# --------------------------------------------------------- the master identity


def test_lhs_vanishes_for_u_alpha():
    rng = np.random.default_rng(21)
    for n, alpha in [(1, 2.0), (2, 3.5), (3, 0.5), (2, 4.0)]:
        for _ in range(20):
            p = sample_point(n, rng, rho_range=(0.3, 3.0))
            U = rd.reduced_jet(rd.u_alpha_reduced(alpha, 1.0), p, 3)
            lhs = rd.lhs_via_jets(U, p, alpha)
            F = p.sigma * (p.sigma**2 + p.t**2) ** ((alpha - 4.0) / 4.0)
            assert abs(lhs) <= 1e-11 * F * F * (1 + (float(p.s @ p.s) + p.t**2) ** 2)


def test_lhs_positive_for_asymmetric_perturbation():
    rng = np.random.default_rng(22)
    for _ in range(20):
        p = sample_point(2, rng, rho_range=(0.5, 2.0))
        seeds = rd.reduced_seeds(p.s, p.t, 3)
        U = rd.u_alpha_reduced(3.0, 1.0)(seeds) + 1e-3 * (seeds[0] - seeds[1])
        lhs = rd.lhs_via_jets(U, p, 3.0)
        rhs = rd.rhs_sum_of_squares("toric_general", U, p, 3.0)
        assert lhs > 0.0
        M = rd.build_matrix_bundle(U, p, 3.0).M
        assert abs(lhs - rhs.total) / master_scale(lhs, rhs.total, M, p, 3.0) < 1e-9


def test_lhs_requires_order_three():
    rng = np.random.default_rng(23)
    p = sample_point(2, rng)
    U = rd.reduced_jet(rd.u_alpha_reduced(2.0, 1.0), p, 2)
    with pytest.raises(InvalidInputError):
        rd.lhs_via_jets(U, p, 2.0)


@pytest.mark.parametrize("n", [1, 2, 3, 4])
def test_master_identity(n):
    rng = np.random.default_rng(100 + n)
    variants = ["cylindrical"]
    if n == 1:
        variants.append("toric_n1")
    if n == 2:
        variants.extend(["toric_n2", "toric_general"])
    if n >= 3:
        variants.append("toric_general")
    for alpha in (0.5, 1.0, 2.0, 3.0, 3.9, 4.0):
        for _ in range(25):
            p = sample_point(n, rng)
            for variant in variants:
                cyl = variant == "cylindrical"
                U = pde_solution_jet(n, alpha, p, rng, order=3, cylindrical=cyl)
                lhs = rd.lhs_via_jets(U, p, alpha)
                rhs = rd.rhs_sum_of_squares(variant, U, p, alpha)
                M = rd.build_matrix_bundle(U, p, alpha).M
                err = abs(lhs - rhs.total) / master_scale(lhs, rhs.total, M, p, alpha)
                assert err < 1e-9, (variant, alpha, err)


def test_cylindrical_matches_toric_specialization():
    rng = np.random.default_rng(24)
    for n in (1, 2, 3):
        other = "toric_n1" if n == 1 else "toric_general"
        for alpha in (0.5, 2.0, 3.9):
            for _ in range(20):
                p = sample_point(n, rng)
                U = pde_solution_jet(n, alpha, p, rng, order=2, cylindrical=True)
                a = rd.rhs_sum_of_squares("cylindrical", U, p, alpha).total
                b = rd.rhs_sum_of_squares(other, U, p, alpha).total
                M = rd.build_matrix_bundle(U, p, alpha).M
                assert rel_err(a, b, scale=float((M * M).sum())) < 1e-10


def test_cylindrical_rhs_invariant_under_simplex_resampling():
    rng = np.random.default_rng(25)
    for n in (2, 3, 4):
        for _ in range(20):
            p = sample_point(n, rng)
            coeffs = rng.uniform(-1, 1, size=3)

            def build(q):
                seeds = rd.reduced_seeds(q.s, q.t, 2)
                U = rd.u_alpha_reduced(2.5, 1.0)(seeds)
                for c, H in zip(coeffs, rd.cylindrical_harmonic_basis(n)):
                    U = U + c * H(seeds)
                return U

            r1 = rd.rhs_sum_of_squares("cylindrical", build(p), p, 2.5).total
            w = 0.01 + (1.0 - 0.01 * n) * rng.dirichlet(np.ones(n))
            p2 = rd.ReducedPoint(n, p.sigma * w, p.t)
            r2 = rd.rhs_sum_of_squares("cylindrical", build(p2), p2, 2.5).total
            assert rel_err(r1, r2, scale=p.sigma**2) < 1e-11


def test_equality_case_rigidity():
    # whenever every named square of the cylindrical identity and the
    # deficit vanish, the gradient is the gauge-ball one
    rng = np.random.default_rng(26)
    for n in (1, 2, 3):
        for alpha in (0.5, 2.0, 3.9):
            for _ in range(20):
                p = sample_point(n, rng, rho_range=(0.2, 2.0))
                U = rd.reduced_jet(rd.u_alpha_reduced(alpha, 2.0), p, 2)
                r = rd.rhs_sum_of_squares("cylindrical", U, p, alpha)
                deficit = rd.frobenius_deficit(rd.build_matrix_bundle(U, p, alpha).M)
                if all(abs(v) <= 1e-18 for v in r.terms.values()) and deficit <= 1e-18:
                    ws, wt = rd.equality_case_gradient(p, alpha)
                    g = U.gradient()
                    assert rel_err(float(g[0]), ws, scale=abs(ws) + abs(wt)) < 1e-8
                    assert rel_err(float(g[n]), wt, scale=abs(ws) + abs(wt)) < 1e-8
