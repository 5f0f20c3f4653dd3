"""Volume and gauge-sphere quadrature for cylindrically symmetric
integrands, and the integral-identity checkers built on it.

A cylindrically symmetric integral reduces to the (r, t) half-plane:
int f dxi = omega_{2n-1} int int f(r, t) r^{2n-1} dr dt with
omega_{2n-1} = 2 pi^n / (n-1)!.  Internally the volume integrals use
gauge-polar coordinates r^2 = rho^2 cos(psi), t = rho^2 sin(psi), in which
the measure becomes rho^{2n+1} cos^{n-1}(psi) d rho d psi, the gauge ball
is a rectangle, and the weight's origin singularity is a pure rho power
handled by a geometrically graded radial mesh.  Gauge-sphere integrals use
t = R^2 cos(theta), under which the characteristic-point singularity of
the naive parametrization cancels in closed form.

Every integral is accepted only after a two-level Richardson
self-consistency test at the requested tolerance; hitting the refinement
cap raises AccuracyError carrying the best estimate."""

from __future__ import annotations

import functools
import math
from dataclasses import dataclass

import numpy as np

from .domains import ReducedDomain
from .errors import AccuracyError, InvalidInputError
from .jets import Jet, jet_space
from .reduced import CylindricalProfile

MEASURES = ("euclidean", "horizontal", "weighted")


def sphere_area(n: int) -> float:
    """Surface area of the unit sphere S^{2n-1} in R^{2n}."""
    return 2.0 * math.pi**n / math.factorial(n - 1)


@dataclass(frozen=True)
class QuadratureSpec:
    rule: str = "tensor_gl"
    nodes: int = 20
    levels: int = 40
    target_rel_tol: float = 1e-10

    def __post_init__(self):
        if self.rule not in ("tensor_gl", "adaptive"):
            raise InvalidInputError(f"unknown quadrature rule {self.rule!r}")
        if self.nodes < 2:
            raise InvalidInputError("nodes must be >= 2")
        if not 1e-14 < self.target_rel_tol < 1e-2:
            raise InvalidInputError("target_rel_tol must lie in (1e-14, 1e-2)")


@dataclass(frozen=True)
class MeanValueCalibration:
    n: int
    R: float
    beta_hat: float
    residual: float

    def __post_init__(self):
        if not self.beta_hat > 0.0:
            raise InvalidInputError("beta_hat must be positive")


@functools.lru_cache(maxsize=None)
def _gl(k: int):
    return np.polynomial.legendre.leggauss(k)


def _panel_nodes(breaks: np.ndarray, k: int):
    """Gauss-Legendre nodes/weights on each panel of a partition."""
    xs, ws = _gl(k)
    a, b = breaks[:-1], breaks[1:]
    mid, half = 0.5 * (a + b), 0.5 * (b - a)
    return (mid[:, None] + half[:, None] * xs[None, :]).ravel(), (
        half[:, None] * ws[None, :]
    ).ravel()


def _graded_breaks(levels: int) -> np.ndarray:
    """Partition of [0, 1] geometrically refined toward 0 (ratio 1/2)."""
    return np.concatenate(([0.0], 0.5 ** np.arange(levels, -1, -1.0)))


def _psi_breaks(levels: int) -> np.ndarray:
    """Partition of [-pi/2, pi/2] refined toward both endpoints, where
    integrands with axis kinks (non-smooth in r^2 at r = 0) lose
    regularity in the gauge-polar angle."""
    g = _graded_breaks(min(levels, 24))
    left = -0.5 * np.pi + 0.5 * np.pi * g
    right = 0.5 * np.pi - 0.5 * np.pi * g[::-1]
    return np.concatenate([left, right[1:]])


def _richardson(evaluate, spec: QuadratureSpec, what: str) -> float:
    """Run evaluate(k) -> (integral, L1 mass) on a doubling node ladder
    until two consecutive levels agree to the target tolerance.  The
    comparison scale includes the integrand's mass so that integrals that
    cancel to zero (odd symmetry) are judged in absolute terms."""
    k = spec.nodes
    prev, _ = evaluate(k)
    for _ in range(4):
        k *= 2
        cur, mass = evaluate(k)
        est = abs(cur - prev) / max(abs(cur), mass, 1e-300)
        if est <= spec.target_rel_tol:
            return cur
        prev = cur
    raise AccuracyError(
        f"{what}: refinement cap reached (estimated relative error {est:.3e})",
        best_estimate=cur,
        estimated_rel_error=est,
    )


def _adaptive_1d(g, a: float, b: float, tol_abs: float, k: int = 15, depth: int = 48):
    """Adaptive panel subdivision: a panel is accepted when the k-node rule
    agrees with its two-half refinement."""
    xs, ws = _gl(k)

    def panel(lo, hi):
        half = 0.5 * (hi - lo)
        return half * float(g(lo + half * (xs + 1.0)) @ ws)

    def recurse(lo, hi, whole, budget, d):
        mid = 0.5 * (lo + hi)
        left, right = panel(lo, mid), panel(mid, hi)
        if abs(left + right - whole) <= budget or d <= 0:
            return left + right
        return recurse(lo, mid, left, budget / 2.0, d - 1) + recurse(
            mid, hi, right, budget / 2.0, d - 1
        )

    return recurse(a, b, panel(a, b), tol_abs, depth)


# --------------------------------------------------------------------------
# volume and surface integrals
# --------------------------------------------------------------------------


def _volume_tensor(f, n: int, domain: ReducedDomain, k: int, levels: int):
    psi, wpsi = _panel_nodes(_psi_breaks(levels), k)
    zeta, wz = _panel_nodes(_graded_breaks(levels), k)
    rad = domain.gauge_radius(psi)  # rho upper limit per psi direction
    rho = rad[:, None] * zeta[None, :]
    r = rho * np.sqrt(np.cos(psi))[:, None]
    t = rho * rho * np.sin(psi)[:, None]
    vals = f(r, t) * rho ** (2 * n + 1)
    cosw = np.cos(psi) ** (n - 1)
    outer = ((vals @ wz) * rad * cosw) @ wpsi
    mass = ((np.abs(vals) @ wz) * rad * cosw) @ wpsi
    return sphere_area(n) * float(outer), sphere_area(n) * float(mass)


def volume_integral_sym(
    f, n: int, domain: ReducedDomain, spec: QuadratureSpec = QuadratureSpec()
) -> float:
    """Integral over the domain of a cylindrically symmetric integrand
    f(r, t) = f(|x|, t); f must be vectorized over arrays."""
    if n < 1:
        raise InvalidInputError("n must be a positive integer")
    if spec.rule == "adaptive":
        first, mass = _volume_tensor(f, n, domain, spec.nodes, spec.levels)
        scale = max(abs(first), mass)

        def outer(psis):
            psis = np.atleast_1d(psis)
            zeta, wz = _panel_nodes(_graded_breaks(spec.levels), spec.nodes)
            out = np.empty_like(psis)
            for i, psi in enumerate(psis):
                rad = domain.gauge_radius(psi)
                rho = rad * zeta
                r = rho * np.sqrt(np.cos(psi))
                t = rho * rho * np.sin(psi)
                out[i] = (f(r, t) * rho ** (2 * n + 1)) @ wz * rad * np.cos(psi) ** (n - 1)
            return out

        tol_abs = spec.target_rel_tol * max(scale, 1e-300)
        return sphere_area(n) * _adaptive_1d(outer, -0.5 * np.pi, 0.5 * np.pi, tol_abs)

    return _richardson(
        lambda k: _volume_tensor(f, n, domain, k, spec.levels), spec, "volume integral"
    )


def _surface_kernel(measure: str, n: int, R: float, theta: np.ndarray) -> np.ndarray:
    """Combined kernel (surface element x measure weight) in the
    t = R^2 cos(theta) parametrization; closed forms avoid any 0/0 at the
    characteristic points theta = 0, pi."""
    sin = np.sin(theta)
    if measure == "euclidean":
        return R ** (2 * n) * sin ** (n - 1) * np.sqrt(
            0.25 * np.cos(theta) ** 2 + R * R * sin**3
        )
    if measure == "horizontal":
        return R ** (2 * n + 1) * sin ** (n - 0.5)
    if measure == "weighted":
        return R ** (2 * n + 1) * sin**n
    raise InvalidInputError(f"unknown surface measure {measure!r}")


def _surface_tensor(g, n: int, R: float, measure: str, k: int, levels: int):
    zeta, wz = _panel_nodes(_graded_breaks(levels), k)
    # graded toward both characteristic points theta = 0 and pi
    theta = np.concatenate([0.5 * np.pi * zeta, np.pi - 0.5 * np.pi * zeta])
    w = np.concatenate([0.5 * np.pi * wz, 0.5 * np.pi * wz])
    r = R * np.sqrt(np.sin(theta))
    t = R * R * np.cos(theta)
    vals = g(r, t) * _surface_kernel(measure, n, R, theta)
    return sphere_area(n) * float(vals @ w), sphere_area(n) * float(np.abs(vals) @ w)


def surface_integral_gauge_sphere(
    g, n: int, R: float, measure: str = "euclidean", spec: QuadratureSpec = QuadratureSpec()
) -> float:
    """Integral of g(r, t) over the gauge sphere rho = R against the
    euclidean surface measure, the horizontal perimeter measure, or the
    mean-value weight |D_H rho|^2 / |D rho| d sigma."""
    if n < 1:
        raise InvalidInputError("n must be a positive integer")
    if not R > 0.0:
        raise InvalidInputError("R must be positive")
    if measure not in MEASURES:
        raise InvalidInputError(f"unknown surface measure {measure!r}")
    if spec.rule == "adaptive":
        first, mass = _surface_tensor(g, n, R, measure, spec.nodes, spec.levels)
        scale = max(abs(first), mass)

        def integrand(theta):
            theta = np.atleast_1d(theta)
            r = R * np.sqrt(np.sin(theta))
            t = R * R * np.cos(theta)
            return g(r, t) * _surface_kernel(measure, n, R, theta)

        tol_abs = spec.target_rel_tol * max(scale, 1e-300)
        # keep a hair away from the endpoints: the closed-form kernel is
        # finite there but r'(t) style quantities in g may not be
        eps = 1e-13
        return sphere_area(n) * _adaptive_1d(integrand, eps, np.pi - eps, tol_abs)

    return _richardson(
        lambda k: _surface_tensor(g, n, R, measure, k, spec.levels),
        spec,
        "surface integral",
    )


# --------------------------------------------------------------------------
# mean-value machinery
# --------------------------------------------------------------------------


def calibrate_beta(
    n: int, R: float, spec: QuadratureSpec = QuadratureSpec()
) -> MeanValueCalibration:
    """Fit the fundamental-solution constant from the solid h == 1 formula
    1 = Q(Q-2) beta R^{-Q} int_{B_R} |D_H rho|^2; the residual compares the
    same calibration at radius 2R (the constant is radius-independent)."""
    Q = 2 * n + 2

    def grad_sq(r, t):
        return r * r / np.sqrt(r**4 + t * t)

    def beta_at(radius):
        dom = ReducedDomain("gauge_ball", radius, 0.0)
        return radius**Q / (Q * (Q - 2.0) * volume_integral_sym(grad_sq, n, dom, spec))

    beta = beta_at(R)
    residual = abs(beta - beta_at(2.0 * R)) / beta
    return MeanValueCalibration(n=n, R=float(R), beta_hat=beta, residual=residual)


_HARMONIC_SAMPLE_SEED = 161803


def _check_harmonic(profile: CylindricalProfile, n: int, R: float, tol: float):
    """Verify sigma (W_ss + W_tt) + n W_s = 0 at 100 seeded interior points."""
    rng = np.random.default_rng(_HARMONIC_SAMPLE_SEED)
    sp = jet_space(2, 2)
    for _ in range(100):
        rho = R * np.sqrt(rng.uniform(0.05, 0.9))
        psi = rng.uniform(-0.49 * np.pi, 0.49 * np.pi)
        sigma = rho * rho * np.cos(psi)
        t = rho * rho * np.sin(psi)
        W = profile([Jet.seed(sp, 0, sigma), Jet.seed(sp, 1, t)])
        wss, wtt = W.second(0, 0), W.second(1, 1)
        ws = W.gradient()[0]
        res = sigma * (wss + wtt) + n * ws
        scale = abs(sigma * wss) + abs(sigma * wtt) + n * abs(ws) + 1e-300
        if abs(res) > tol * scale:
            raise InvalidInputError(
                f"profile {profile.name!r} is not harmonic: residual {res:.3e} "
                f"at (sigma, t) = ({sigma:.4f}, {t:.4f})"
            )


def mean_value_check(
    profile: CylindricalProfile,
    n: int,
    R: float,
    spec: QuadratureSpec = QuadratureSpec(),
    beta: float = None,
    harmonic_tol: float = 1e-9,
) -> dict:
    """Compare the pointwise value at the origin of a harmonic profile
    W(sigma, t) with its weighted solid and surface averages over the
    gauge ball/sphere of radius R."""
    _check_harmonic(profile, n, R, harmonic_tol)
    if beta is None:
        beta = calibrate_beta(n, R, spec).beta_hat
    Q = 2 * n + 2

    def h(r, t):
        return profile([r * r, t])

    solid = (
        Q * (Q - 2.0) * beta / R**Q
        * volume_integral_sym(
            lambda r, t: h(r, t) * r * r / np.sqrt(r**4 + t * t),
            n,
            ReducedDomain("gauge_ball", R, 0.0),
            spec,
        )
    )
    surface = (
        (Q - 2.0) * beta / R ** (Q - 1)
        * surface_integral_gauge_sphere(h, n, R, "weighted", spec)
    )
    return {
        "pointwise": float(profile([0.0, 0.0])),
        "solid_avg": float(solid),
        "surface_avg": float(surface),
        "beta": float(beta),
    }


def fundamental_profile(n: int, pole_t: float) -> CylindricalProfile:
    """rho^(2-Q) translated to the pole (0, pole_t): harmonic wherever the
    pole is excluded, cylindrically symmetric."""
    Q = 2 * n + 2

    def fn(c):
        sigma, t = c[0], c[-1]
        dt = t - pole_t
        return (sigma * sigma + dt * dt) ** ((2.0 - Q) / 4.0)

    return CylindricalProfile(f"fundamental(pole_t={pole_t})", fn)


# --------------------------------------------------------------------------
# Pohozaev-type and weighted-average identities
# --------------------------------------------------------------------------


def _analytic_pieces(alpha: float, n: int, R: float, spec: QuadratureSpec):
    dom = ReducedDomain("gauge_ball", R, 0.0)

    def q(r, t):
        return r**4 + t * t

    F = lambda r, t: r * r * q(r, t) ** ((alpha - 4.0) / 4.0)
    u = lambda r, t: (q(r, t) ** (alpha / 4.0) - R**alpha) / alpha
    Zu = lambda r, t: q(r, t) ** (alpha / 4.0)
    I_F = volume_integral_sym(F, n, dom, spec)
    I_uF = volume_integral_sym(lambda r, t: u(r, t) * F(r, t), n, dom, spec)
    I_ZuF = volume_integral_sym(lambda r, t: Zu(r, t) * F(r, t), n, dom, spec)
    # boundary integrand Z(u) |D_H u| = rho^alpha rho^(alpha-2) r on rho = R
    S = surface_integral_gauge_sphere(
        lambda r, t: q(r, t) ** (alpha / 4.0) * q(r, t) ** ((alpha - 2.0) / 4.0) * r,
        n,
        R,
        "horizontal",
        spec,
    )
    return I_F, I_uF, I_ZuF, S


def _rel_residual(lhs: float, rhs: float, scale: float = 0.0) -> float:
    """Residual relative to the sides or, when both cancel to zero (e.g.
    the alpha = 2 transport identity), to the magnitude of their addends."""
    return abs(lhs - rhs) / max(abs(lhs), abs(rhs), scale, 1e-300)


def pohozaev_check(
    alpha: float,
    n: int,
    R: float,
    u_source="analytic",
    spec: QuadratureSpec = QuadratureSpec(),
) -> dict:
    """(Q + 2 alpha - 2) int u F = -c^2 int F for the gauge-ball solution
    (analytic mode, with the three proof sub-identities evaluated in closed
    boundary form) or a finite-difference solution (grid mode)."""
    if not alpha > 0.0:
        raise InvalidInputError("alpha must be positive")
    Q = 2 * n + 2
    if isinstance(u_source, str) and u_source == "analytic":
        I_F, I_uF, I_ZuF, S = _analytic_pieces(alpha, n, R, spec)
        c2 = R**alpha
        lhs = (Q + 2.0 * alpha - 2.0) * I_uF
        rhs = -c2 * I_F
        subs = [
            {
                "name": "dilation_parts",
                "lhs": (Q + alpha - 2.0) * (alpha * I_uF - I_ZuF),
                "rhs": -S,
                "scale": (Q + alpha - 2.0) * (alpha * abs(I_uF) + abs(I_ZuF)) + S,
            },
            {
                "name": "boundary_flux",
                "lhs": S,
                "rhs": c2 * (Q + alpha - 2.0) * I_F,
                "scale": S + c2 * (Q + alpha - 2.0) * abs(I_F),
            },
            {
                "name": "radial_transport",
                "lhs": (alpha - 2.0) * I_uF,
                "rhs": -Q * I_uF - I_ZuF,
                "scale": (Q + abs(alpha - 2.0)) * abs(I_uF) + abs(I_ZuF),
            },
        ]
        for srec in subs:
            srec["residual"] = _rel_residual(srec["lhs"], srec["rhs"], srec.pop("scale"))
        return {
            "mode": "analytic",
            "lhs": lhs,
            "rhs": rhs,
            "residual": _rel_residual(lhs, rhs),
            "sub_identities": subs,
        }

    # grid mode: u_source is a GridSolution
    from . import solver as sv

    sol = u_source
    F = _weight_on_nodes(sol, alpha)
    I_uF = sv.nodal_integral(sol, sol.W * F)
    I_F = sv.nodal_integral(sol, F)
    c = sv.neumann_trace(sol).mean
    lhs = (Q + 2.0 * alpha - 2.0) * I_uF
    rhs = -c * c * I_F
    return {
        "mode": "grid",
        "lhs": lhs,
        "rhs": rhs,
        "residual": _rel_residual(lhs, rhs),
        "sub_identities": [],
    }


def _weight_on_nodes(sol, alpha: float) -> np.ndarray:
    sigma, t = sol.node_sigma, sol.node_t
    return sigma * (sigma * sigma + t * t) ** ((alpha - 4.0) / 4.0)


def average_identity_check(
    alpha: float,
    n: int,
    R: float,
    u_source="analytic",
    spec: QuadratureSpec = QuadratureSpec(),
    c: float = None,
) -> dict:
    """int v F = c^2 int F: the auxiliary scalar v is, on F-average, equal
    to its boundary constant."""
    if not alpha > 0.0:
        raise InvalidInputError("alpha must be positive")
    if isinstance(u_source, str) and u_source == "analytic":
        dom = ReducedDomain("gauge_ball", R, 0.0)

        def q(r, t):
            return r**4 + t * t

        def F(r, t):
            return r * r * q(r, t) ** ((alpha - 4.0) / 4.0)

        def v(r, t):
            grad_sq = q(r, t) ** ((2.0 * alpha - 4.0) / 4.0) * r * r
            u = (q(r, t) ** (alpha / 4.0) - R**alpha) / alpha
            return grad_sq / F(r, t) - alpha * u

        if c is None:
            c = R ** (alpha / 2.0)
        lhs = volume_integral_sym(lambda r, t: v(r, t) * F(r, t), n, dom, spec)
        rhs = c * c * volume_integral_sym(F, n, dom, spec)
        return {"mode": "analytic", "lhs": lhs, "rhs": rhs, "residual": _rel_residual(lhs, rhs)}

    from . import solver as sv

    sol = u_source
    pg = sv.pfunction_on_grid(sol)
    F = _weight_on_nodes(sol, alpha)[pg.node_indices]
    if c is None:
        c = sv.neumann_trace(sol).mean
    lhs = sv.nodal_integral(sol, pg.v * F, node_indices=pg.node_indices)
    rhs = c * c * sv.nodal_integral(sol, F, node_indices=pg.node_indices)
    return {"mode": "grid", "lhs": lhs, "rhs": rhs, "residual": _rel_residual(lhs, rhs)}
