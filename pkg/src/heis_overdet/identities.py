"""Batch harness for the pointwise identity suites.

Each identity is checked at a stream of seeded random points; the stream is
prefix-stable (point i depends only on (seed, i)), so enlarging a run
extends it and the worst-case error is monotone in the point count.
Reports record the worst point for post-mortem and are bitwise
reproducible for a fixed seed.
"""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from . import heisenberg as hg
from . import reduced as rd
from .errors import InvalidInputError
from .heisenberg import REL_FLOOR, rel_err

FULL_SPACE_IDS = ("dhrho", "derfa_all", "ualpha_pde", "z_homogeneity", "fundamental_solution")
REDUCED_IDS = ("magik", "magikuno", "tordue", "cyln", "trace_formula", "matrix_deficit")
IDENTITY_IDS = FULL_SPACE_IDS + REDUCED_IDS

# Closed-form-vs-closed-form checks sit at 1e-13; order-3 jet identities at
# 1e-9 (third derivatives lose a few digits through the truncated-Taylor
# arithmetic on gauge powers); everything else in between.
DEFAULT_TOLERANCES = {
    "dhrho": 1e-13,
    "derfa_all": 1e-10,
    "ualpha_pde": 1e-10,
    "z_homogeneity": 1e-10,
    "fundamental_solution": 1e-10,
    "magik": 1e-9,
    "magikuno": 1e-9,
    "tordue": 1e-9,
    "cyln": 1e-9,
    "trace_formula": 1e-11,
    "matrix_deficit": 1e-11,
}

DEFAULT_ALPHAS = (0.5, 1.0, 2.0, 3.0, 3.9, 4.0)
DEFAULT_NS = (1, 2, 3, 4)


def worker_count() -> int:
    """Parallelism cap; HEIS_OVERDET_THREADS overrides the default."""
    env = os.environ.get("HEIS_OVERDET_THREADS")
    if env:
        try:
            k = int(env)
        except ValueError as exc:
            raise InvalidInputError(f"HEIS_OVERDET_THREADS must be an integer: {env!r}") from exc
        if k < 1:
            raise InvalidInputError("HEIS_OVERDET_THREADS must be >= 1")
        return k
    return min(4, os.cpu_count() or 1)


@dataclass(frozen=True)
class SampleConfig:
    seed: int = 20240901
    num_points: int = 1000
    rho_range: tuple = (0.1, 10.0)
    simplex_floor: float = 0.01
    t_over_sigma_range: tuple = (-5.0, 5.0)

    def __post_init__(self):
        if self.seed < 0:
            raise InvalidInputError("seed must be a nonnegative 64-bit integer")
        if self.num_points < 1:
            raise InvalidInputError("num_points must be positive")
        if not self.rho_range[0] > 0.0:
            raise InvalidInputError("rho_range minimum must be positive")
        if not 0.0 < self.simplex_floor < 1.0:
            raise InvalidInputError("simplex_floor must lie in (0, 1)")

    def check_n(self, n: int):
        if self.simplex_floor * n >= 1.0:
            raise InvalidInputError(
                f"simplex_floor * n must stay below 1 (floor={self.simplex_floor}, n={n})"
            )


@dataclass(frozen=True)
class IdentityReport:
    identity_id: str
    n: int
    alpha: float
    num_points: int
    max_rel_err: float
    argmax_point: dict
    passed: bool
    tolerance: float

    def to_dict(self) -> dict:
        return {
            "identity_id": self.identity_id,
            "n": self.n,
            "alpha": self.alpha,
            "num_points": self.num_points,
            "max_rel_err": self.max_rel_err,
            "argmax_point": self.argmax_point,
            "pass": self.passed,
            "tolerance": self.tolerance,
        }


# --------------------------------------------------------------------------
# prefix-stable sampling
# --------------------------------------------------------------------------


def _point_rng(seed: int, i: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(entropy=(int(seed), int(i))))


def sample_group_points(n: int, cfg: SampleConfig):
    """Points with log-uniform gauge norm and Gaussian direction;
    returns x of shape (2n, B) and t of shape (B,)."""
    lo, hi = np.log(cfg.rho_range[0]), np.log(cfg.rho_range[1])
    xs = np.empty((2 * n, cfg.num_points))
    ts = np.empty(cfg.num_points)
    for i in range(cfg.num_points):
        rng = _point_rng(cfg.seed, i)
        g = rng.normal(size=2 * n)
        tg = rng.normal()
        rho = np.exp(rng.uniform(lo, hi))
        r0 = ((g @ g) ** 2 + tg * tg) ** 0.25
        lam = rho / r0
        xs[:, i] = lam * g
        ts[i] = lam * lam * tg
    return xs, ts


def sample_reduced_points(n: int, cfg: SampleConfig, num_coeffs: int = 0):
    """Reduced points with log-uniform gauge norm, a simplex split of
    sigma with the configured floor, t/sigma uniform in its range, plus
    per-point combination coefficients; all prefix-stable."""
    cfg.check_n(n)
    lo, hi = np.log(cfg.rho_range[0]), np.log(cfg.rho_range[1])
    ss = np.empty((n, cfg.num_points))
    ts = np.empty(cfg.num_points)
    coeffs = np.empty((num_coeffs, cfg.num_points))
    for i in range(cfg.num_points):
        rng = _point_rng(cfg.seed, i)
        rho = np.exp(rng.uniform(lo, hi))
        tau = rng.uniform(*cfg.t_over_sigma_range)
        w = cfg.simplex_floor + (1.0 - n * cfg.simplex_floor) * rng.dirichlet(np.ones(n))
        sigma = rho * rho / np.sqrt(1.0 + tau * tau)
        ss[:, i] = sigma * w
        ts[i] = tau * sigma
        if num_coeffs:
            coeffs[:, i] = rng.uniform(-1.0, 1.0, size=num_coeffs)
    return ss, ts, coeffs


# --------------------------------------------------------------------------
# identity runners: each returns (errors, argmax-metadata callback)
# --------------------------------------------------------------------------


def _group_meta(x, t):
    return lambda i: {"x": [float(v) for v in x[:, i]], "t": float(t[i])}


def _reduced_meta(s, t, coeffs):
    return lambda i: {
        "s": [float(v) for v in s[:, i]],
        "t": float(t[i]),
        "coeffs": [float(v) for v in coeffs[:, i]],
    }


def _run_dhrho(n, alpha, cfg):
    x, t = sample_group_points(n, cfg)
    jet = hg.gauge_field(hg.coord_seeds(x, t, 1))
    gh = hg.horizontal_gradient_from_jet(jet, x)
    lhs = np.sqrt((gh * gh).sum(axis=0))
    rho = jet.value
    rhs = np.sqrt((x * x).sum(axis=0)) / rho
    return rel_err(lhs, rhs), _group_meta(x, t)


def _run_derfa_all(n, alpha, cfg):
    # The displayed closed forms are sums whose addends can cancel to many
    # digits (e.g. the gradient-norm formula near t = 0 at alpha = 2), so
    # each comparison is scaled by the magnitude of its own addends: the
    # check measures transcription error, not cancellation noise.
    x, t = sample_group_points(n, cfg)
    closed = hg.closed_weight_derivatives(alpha, x, t)
    oracle = hg.jet_weight_derivatives(alpha, x, t)
    s = (x * x).sum(axis=0)
    rho = (s * s + t * t) ** 0.25
    Q = 2 * n + 2
    s_grad = 2.0 * np.sqrt(s) * rho ** (alpha - 4.0) + abs(alpha - 4.0) * s**1.5 * rho ** (
        alpha - 6.0
    )
    s_norm = 4.0 * s * rho ** (2 * alpha - 8.0) + abs(alpha * (alpha - 4.0)) * s**3 * rho ** (
        2 * alpha - 12.0
    )
    s_lap = 2.0 * (Q - 2.0) * rho ** (alpha - 4.0) + abs(
        (alpha - 4.0) * (Q + alpha - 2.0)
    ) * s * s * rho ** (alpha - 8.0)
    gnorm_a = np.sqrt((closed.grad_h**2).sum(axis=0))
    gnorm_b = np.sqrt((oracle.grad_h**2).sum(axis=0))
    denom = np.maximum(np.maximum(gnorm_a, gnorm_b), np.maximum(s_grad, REL_FLOOR))
    errs = np.max(np.abs(closed.grad_h - oracle.grad_h), axis=0) / denom
    errs = np.maximum(
        errs, rel_err(closed.grad_h_norm_sq, oracle.grad_h_norm_sq, scale=s_norm)
    )
    errs = np.maximum(errs, rel_err(closed.t_deriv, oracle.t_deriv))
    errs = np.maximum(errs, rel_err(closed.laplacian, oracle.laplacian, scale=s_lap))
    return errs, _group_meta(x, t)


def _run_ualpha_pde(n, alpha, cfg):
    x, t = sample_group_points(n, cfg)
    u = hg.candidate_u(alpha, 1.0)
    lap = hg.sublaplacian_from_jet(u(hg.coord_seeds(x, t, 2)), x)
    F = hg.weight_field(alpha)(hg.coord_seeds(x, t, 0)).value
    rhs = (2 * n + alpha) * F
    # rho^(alpha-2) is the magnitude of the second-derivative terms that
    # combine into Delta_H u; near the t-axis the combination is much
    # smaller than its addends.
    s = (x * x).sum(axis=0)
    scale = (s * s + t * t) ** ((alpha - 2.0) / 4.0)
    return rel_err(lap, rhs, scale=scale), _group_meta(x, t)


def _run_z_homogeneity(n, alpha, cfg):
    x, t = sample_group_points(n, cfg)
    jet = hg.weight_field(alpha)(hg.coord_seeds(x, t, 1))
    lhs = hg.z_field_from_jet(jet, x, t)
    rhs = (alpha - 2.0) * jet.value
    return rel_err(lhs, rhs, scale=np.abs(jet.value)), _group_meta(x, t)


def _run_fundamental_solution(n, alpha, cfg):
    x, t = sample_group_points(n, cfg)
    jet = hg.fundamental_field()(hg.coord_seeds(x, t, 2))
    lap = hg.sublaplacian_from_jet(jet, x)
    s = (x * x).sum(axis=0)
    rhoQ = (s * s + t * t) ** ((2 * n + 2) / 4.0)
    return np.abs(lap) * rhoQ, _group_meta(x, t)


def _build_toric_jets(n, alpha, s, t, coeffs, order):
    seeds = rd.reduced_seeds(s, t, order)
    basis = rd.harmonic_basis(n)
    U = rd.u_alpha_reduced(alpha, 1.0)(seeds)
    for k, H in enumerate(basis):
        U = U + coeffs[k] * H(seeds)
    return U


def _build_cyl_jets(n, alpha, s, t, coeffs, order):
    seeds = rd.reduced_seeds(s, t, order)
    basis = rd.cylindrical_harmonic_basis(n)
    U = rd.u_alpha_reduced(alpha, 1.0)(seeds)
    for k, H in enumerate(basis):
        U = U + coeffs[k] * H(seeds)
    return U


def _master_scale(lhs, rhs, M, s, t, alpha):
    sigma = s.sum(axis=0)
    q4 = sigma * sigma + t * t
    F = sigma * q4 ** ((alpha - 4.0) / 4.0)
    norm_p4 = ((s * s).sum(axis=0) + t * t) ** 2
    scale = np.maximum(np.abs(lhs), np.abs(rhs))
    scale = np.maximum(scale, (M * M).sum(axis=(0, 1)))
    return np.maximum(scale, F * F * (1.0 + norm_p4))


def _master_runner(variant, builder):
    def run(n, alpha, cfg):
        nc = len(rd.harmonic_basis(n)) if builder is _build_toric_jets else 3
        s, t, coeffs = sample_reduced_points(n, cfg, nc)
        U = builder(n, alpha, s, t, coeffs, 3)
        lhs = rd._lhs_via_jets(U, s, t, alpha)
        terms = rd._rhs_terms(variant, U, s, t, alpha)
        rhs = sum(terms.values())
        M = rd._matrix_bundle(U, s, t, alpha)[4]
        scale = _master_scale(lhs, rhs, M, s, t, alpha)
        return np.abs(lhs - rhs) / scale, _reduced_meta(s, t, coeffs)

    return run


def _run_trace_formula(n, alpha, cfg):
    s, t, coeffs = sample_reduced_points(n, cfg, len(rd.harmonic_basis(n)))
    U = _build_toric_jets(n, alpha, s, t, coeffs, 2)
    D2, _, _, D1, _, td, tf = rd._matrix_bundle(U, s, t, alpha)
    scale = np.sqrt((D2 * D2).sum(axis=(0, 1))) + np.sqrt((D1 * D1).sum(axis=(0, 1)))
    return rel_err(td, tf, scale=scale), _reduced_meta(s, t, coeffs)


def _run_matrix_deficit(n, alpha, cfg):
    s, t, coeffs = sample_reduced_points(n, cfg, len(rd.harmonic_basis(n)))
    U = _build_toric_jets(n, alpha, s, t, coeffs, 2)
    M = rd._matrix_bundle(U, s, t, alpha)[4]
    deficit = rd._frobenius_deficit(M)
    tr = np.trace(M, axis1=0, axis2=1)
    centered = M - (tr / (n + 1.0)) * np.eye(n + 1).reshape(n + 1, n + 1, 1)
    explicit = (centered * centered).sum(axis=(0, 1))
    scale = (M * M).sum(axis=(0, 1))
    return rel_err(deficit, explicit, scale=scale), _reduced_meta(s, t, coeffs)


IDENTITY_RUNNERS = {
    "dhrho": _run_dhrho,
    "derfa_all": _run_derfa_all,
    "ualpha_pde": _run_ualpha_pde,
    "z_homogeneity": _run_z_homogeneity,
    "fundamental_solution": _run_fundamental_solution,
    "magik": _master_runner("toric_general", _build_toric_jets),
    "magikuno": _master_runner("toric_n1", _build_toric_jets),
    "tordue": _master_runner("toric_n2", _build_toric_jets),
    "cyln": _master_runner("cylindrical", _build_cyl_jets),
    "trace_formula": _run_trace_formula,
    "matrix_deficit": _run_matrix_deficit,
}


def check_compatible(identity_id: str, n: int):
    if identity_id not in IDENTITY_RUNNERS:
        raise InvalidInputError(f"unknown identity {identity_id!r}")
    if n < 1:
        raise InvalidInputError("n must be a positive integer")
    if identity_id == "magikuno" and n != 1:
        raise InvalidInputError("magikuno requires n == 1")
    if identity_id == "tordue" and n != 2:
        raise InvalidInputError("tordue requires n == 2")
    if identity_id == "magik" and n < 2:
        raise InvalidInputError("magik requires n >= 2")


def run_identity(
    identity_id: str, n: int, alpha: float, cfg: SampleConfig, tolerance: float = None
) -> IdentityReport:
    """Run one identity over the sampled point stream and report the
    worst relative error; deterministic for a fixed cfg.seed."""
    check_compatible(identity_id, n)
    if identity_id not in ("dhrho", "fundamental_solution") and not 0.0 < alpha <= 4.0:
        raise InvalidInputError(f"alpha must lie in (0, 4], got {alpha}")
    if tolerance is None:
        tolerance = DEFAULT_TOLERANCES.get(identity_id, 1e-9)
    errs, meta = IDENTITY_RUNNERS[identity_id](n, alpha, cfg)
    errs = np.asarray(errs, dtype=float)
    i = int(np.argmax(errs))
    worst = float(errs[i])
    return IdentityReport(
        identity_id=identity_id,
        n=n,
        alpha=float(alpha),
        num_points=cfg.num_points,
        max_rel_err=worst,
        argmax_point=meta(i),
        passed=bool(worst <= tolerance),
        tolerance=float(tolerance),
    )


def default_grid(ns=DEFAULT_NS, alphas=DEFAULT_ALPHAS) -> list:
    """Every identity over every compatible (n, alpha); alpha-independent
    identities appear once per n."""
    grid = []
    for n in ns:
        grid.append(("dhrho", n, 2.0))
        grid.append(("fundamental_solution", n, 2.0))
        for alpha in alphas:
            for ident in ("derfa_all", "ualpha_pde", "z_homogeneity"):
                grid.append((ident, n, alpha))
            grid.append(("cyln", n, alpha))
            if n == 1:
                grid.append(("magikuno", n, alpha))
            if n == 2:
                grid.append(("tordue", n, alpha))
            if n >= 2:
                grid.append(("magik", n, alpha))
            grid.append(("trace_formula", n, alpha))
            grid.append(("matrix_deficit", n, alpha))
    return grid


def run_suite(grid, cfg: SampleConfig, tolerances: dict = None):
    """Run a list of (identity_id, n, alpha) triples; stable ordering.
    Returns (reports, summary)."""
    tolerances = tolerances or {}
    for ident, n, _ in grid:
        check_compatible(ident, n)

    def one(item):
        ident, n, alpha = item
        return run_identity(ident, n, alpha, cfg, tolerances.get(ident))

    if len(grid) > 1 and worker_count() > 1:
        with ThreadPoolExecutor(max_workers=worker_count()) as pool:
            reports = list(pool.map(one, grid))
    else:
        reports = [one(item) for item in grid]
    summary = {
        "pass": bool(all(r.passed for r in reports)),
        "num_reports": len(reports),
        "num_failures": int(sum(not r.passed for r in reports)),
        "max_rel_err": float(max((r.max_rel_err for r in reports), default=0.0)),
    }
    return reports, summary


def suite_to_dict(reports, summary, cfg: SampleConfig) -> dict:
    return {
        "config": {
            "seed": cfg.seed,
            "num_points": cfg.num_points,
            "rho_range": list(cfg.rho_range),
            "simplex_floor": cfg.simplex_floor,
            "t_over_sigma_range": list(cfg.t_over_sigma_range),
        },
        "summary": summary,
        "reports": [r.to_dict() for r in reports],
    }
