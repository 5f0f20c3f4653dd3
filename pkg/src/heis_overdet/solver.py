"""Second-order finite differences for the reduced cylindrical Dirichlet
problem

    sigma (W_ss + W_tt) + n W_s = ((2n+alpha)/4) sigma (sigma^2+t^2)^((alpha-4)/4)

on gauge balls and perturbed domains, with W = 0 on the curved boundary.

The grid is uniform with spacing h in both directions; the t rows are
staggered by h/2 so no node sits at the reduced origin, where the source
of the divided-by-sigma equation is unbounded for alpha < 4.  Nodes next
to the curved boundary get Shortley-Weller shortened arms (the boundary
curve is known in closed form, so arm lengths are exact).  On the axis
sigma = 0 the equation trace forces W_s = 0; a ghost reflection implements
it and the assembled equation is the regularized limit
(n+1) W_ss + W_tt = source/sigma.

alpha is restricted to [2, 4]: below 2 the source blows up at the reduced
origin and the plain second-order treatment no longer applies.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .domains import ReducedDomain
from .errors import InvalidInputError, SolverError
from .serialize import write_csv

_RESIDUAL_TOL = 1e-10


@dataclass(frozen=True)
class Grid:
    domain: ReducedDomain
    h: float
    ij: np.ndarray          # (N, 2) integer node labels; sigma = i h, t = (j + 1/2) h
    index: dict             # (i, j) -> row
    arm_e: np.ndarray       # east arm length (<= h; boundary-shortened)
    arm_n: np.ndarray
    arm_s: np.ndarray
    axis: np.ndarray        # mask: i == 0

    @property
    def num_nodes(self) -> int:
        return self.ij.shape[0]

    @property
    def sigma(self) -> np.ndarray:
        return self.ij[:, 0] * self.h

    @property
    def t(self) -> np.ndarray:
        return (self.ij[:, 1] + 0.5) * self.h

    def neighbor(self, k: int, di: int, dj: int):
        return self.index.get((self.ij[k, 0] + di, self.ij[k, 1] + dj))


def build_grid(domain: ReducedDomain, h: float) -> Grid:
    """Enumerate interior nodes and their (possibly shortened) arms."""
    if not h > 0.0:
        raise InvalidInputError("h must be positive")
    if h > domain.R**2 / 8.0:
        raise InvalidInputError(f"h = {h} too coarse; need h <= R^2/8 = {domain.R**2 / 8}")
    imax = int(math.floor(domain.sigma_max / h)) + 1
    jmax = int(math.floor(domain.t_axis_max / h)) + 1
    ij = []
    for i in range(imax + 1):
        for j in range(-jmax - 1, jmax + 1):
            if domain.contains(i * h, (j + 0.5) * h):
                ij.append((i, j))
    ij = np.array(ij, dtype=np.int64)
    index = {(int(i), int(j)): k for k, (i, j) in enumerate(ij)}
    N = ij.shape[0]
    arm_e = np.full(N, h)
    arm_n = np.full(N, h)
    arm_s = np.full(N, h)
    for k, (i, j) in enumerate(ij):
        sig, t = i * h, (j + 0.5) * h
        if (i + 1, j) not in index:
            arm_e[k] = float(domain.boundary_sigma(t)) - sig
        if (i, j + 1) not in index:
            arm_n[k] = float(domain.boundary_t(sig)) - t
        if (i, j - 1) not in index:
            arm_s[k] = t + float(domain.boundary_t(sig))
    axis = ij[:, 0] == 0
    return Grid(domain, float(h), ij, index, arm_e, arm_n, arm_s, axis)


@dataclass(frozen=True)
class GridSolution:
    grid: Grid
    alpha: float
    n: int
    W: np.ndarray
    residual: float
    injected: bool = False

    @property
    def h_sigma(self) -> float:
        return self.grid.h

    @property
    def h_t(self) -> float:
        return self.grid.h

    @property
    def node_sigma(self) -> np.ndarray:
        return self.grid.sigma

    @property
    def node_t(self) -> np.ndarray:
        return self.grid.t

    def metadata(self) -> dict:
        return {
            "alpha": self.alpha,
            "n": self.n,
            "domain_kind": self.grid.domain.kind,
            "R": self.grid.domain.R,
            "epsilon": self.grid.domain.epsilon,
            "h": self.grid.h,
            "num_nodes": self.grid.num_nodes,
            "linear_residual": self.residual,
            "injected": self.injected,
        }


def _source(alpha: float, n: int, sigma, t):
    """((2n+alpha)/4) (sigma^2+t^2)^((alpha-4)/4): source of the
    divided-by-sigma equation."""
    return (2 * n + alpha) / 4.0 * (sigma * sigma + t * t) ** ((alpha - 4.0) / 4.0)


def assemble_and_solve(grid: Grid, alpha: float, n: int) -> GridSolution:
    """Assemble the Shortley-Weller system and solve it with a sparse
    direct factorization; deterministic, relative residual <= 1e-10."""
    if not 2.0 <= alpha <= 4.0:
        raise InvalidInputError(f"the solver requires alpha in [2, 4], got {alpha}")
    if n < 1:
        raise InvalidInputError("n must be a positive integer")
    h = grid.h
    N = grid.num_nodes
    rows, cols, vals = [], [], []
    b = np.zeros(N)

    def add(r, c, v):
        rows.append(r)
        cols.append(c)
        vals.append(v)

    for k in range(N):
        i, j = int(grid.ij[k, 0]), int(grid.ij[k, 1])
        sig, t = i * h, (j + 0.5) * h
        hE, hN, hS = grid.arm_e[k], grid.arm_n[k], grid.arm_s[k]
        east = grid.neighbor(k, 1, 0)
        north = grid.neighbor(k, 0, 1)
        south = grid.neighbor(k, 0, -1)
        if i == 0:
            # axis: (n+1) W_ss + W_tt = G, ghost reflection W(-s) = W(s)
            cE = (n + 1) * 2.0 / (hE * hE)
            diag = -cE
            if east is not None:
                add(k, east, cE)
            cN = 2.0 / (hN * (hN + hS))
            cS = 2.0 / (hS * (hN + hS))
            diag += -2.0 / (hN * hS)
            if north is not None:
                add(k, north, cN)
            if south is not None:
                add(k, south, cS)
            add(k, k, diag)
            b[k] = _source(alpha, n, sig, t)
        else:
            hW = h  # the west neighbor of an interior node is always interior
            west = grid.neighbor(k, -1, 0)
            # sigma (W_ss + W_tt) + n W_s = sigma G
            cW = sig * 2.0 / (hW * (hW + hE)) - n * hE / (hW * (hE + hW))
            cE = sig * 2.0 / (hE * (hW + hE)) + n * hW / (hE * (hE + hW))
            cP = -sig * 2.0 / (hW * hE) + n * (hE - hW) / (hE * hW)
            cN = sig * 2.0 / (hN * (hN + hS))
            cS = sig * 2.0 / (hS * (hN + hS))
            cP += -sig * 2.0 / (hN * hS)
            add(k, west, cW)
            if east is not None:
                add(k, east, cE)
            if north is not None:
                add(k, north, cN)
            if south is not None:
                add(k, south, cS)
            add(k, k, cP)
            b[k] = sig * _source(alpha, n, sig, t)

    A = sp.csc_matrix((vals, (rows, cols)), shape=(N, N))
    lu = spla.splu(A)
    W = lu.solve(b)
    residual = float(np.linalg.norm(A @ W - b) / np.linalg.norm(b))
    if residual > _RESIDUAL_TOL:
        raise SolverError(f"linear solve residual {residual:.3e} exceeds 1e-10", residual)
    return GridSolution(grid, float(alpha), int(n), W, residual)


def analytic_solution(grid: Grid, alpha: float, n: int) -> GridSolution:
    """Inject the gauge-ball solution onto the grid without solving;
    isolates post-processing error from solve error."""
    sig, t = grid.sigma, grid.t
    R = grid.domain.R
    W = ((sig * sig + t * t) ** (alpha / 4.0) - R**alpha) / alpha
    return GridSolution(grid, float(alpha), int(n), W, 0.0, injected=True)


# --------------------------------------------------------------------------
# interpolation and the Neumann trace
# --------------------------------------------------------------------------


def _interp(sol: GridSolution, sigma: float, t: float) -> float:
    """Tensor-quadratic interpolation on the 3x3 node block nearest the
    point; sigma-reflection supplies ghost values across the axis; falls
    back to bilinear with zero boundary extension if the block is cut."""
    g = sol.grid
    h = g.h
    fi = sigma / h
    fj = t / h - 0.5
    i0 = int(round(fi))
    j0 = int(round(fj))
    vals = np.empty((3, 3))
    ok = True
    for a, di in enumerate((-1, 0, 1)):
        for c, dj in enumerate((-1, 0, 1)):
            ii, jj = i0 + di, j0 + dj
            if ii < 0:
                ii = -ii  # even reflection across the axis
            k = g.index.get((ii, jj))
            if k is None:
                ok = False
                break
            vals[a, c] = sol.W[k]
        if not ok:
            break
    if ok:
        xi = fi - i0
        eta = fj - j0
        wx = np.array([0.5 * xi * (xi - 1.0), 1.0 - xi * xi, 0.5 * xi * (xi + 1.0)])
        wy = np.array([0.5 * eta * (eta - 1.0), 1.0 - eta * eta, 0.5 * eta * (eta + 1.0)])
        return float(wx @ vals @ wy)
    # bilinear fallback; boundary values are zero
    ib, jb = int(math.floor(fi)), int(math.floor(fj))
    acc = 0.0
    for di in (0, 1):
        for dj in (0, 1):
            ii, jj = ib + di, jb + dj
            if ii < 0:
                ii = -ii
            k = g.index.get((ii, jj))
            w = (1.0 - abs(fi - (ib + di))) * (1.0 - abs(fj - (jb + dj)))
            if k is not None:
                acc += w * sol.W[k]
    return acc


@dataclass(frozen=True)
class NeumannTrace:
    arc_param: np.ndarray
    q: np.ndarray
    mean: float
    std: float
    cv: float


def neumann_trace(
    sol: GridSolution, num_samples: int = 129, clip: float = 0.02
) -> NeumannTrace:
    """q = |D_H u| / F^(1/2) = 2 sqrt(W_s^2 + W_t^2) (sigma^2+t^2)^((4-alpha)/8)
    along the boundary, from second-order one-sided differences along the
    inward normal (u = 0 on the boundary makes the gradient normal).  The
    two characteristic endpoints are excluded by clipping the arc."""
    g = sol.grid
    dom = g.domain
    phi = np.linspace(
        -0.5 * np.pi + clip * np.pi, 0.5 * np.pi - clip * np.pi, num_samples
    )
    delta = 2.0 * g.h
    qs = np.empty(num_samples)
    for m, p in enumerate(phi):
        sb, tb = dom.boundary_point(p)
        nrm = np.array([2.0 * sb, 2.0 * (1.0 + dom.epsilon) * tb])
        nrm /= np.linalg.norm(nrm)
        w1 = _interp(sol, sb - delta * nrm[0], tb - delta * nrm[1])
        w2 = _interp(sol, sb - 2.0 * delta * nrm[0], tb - 2.0 * delta * nrm[1])
        grad_n = (4.0 * w1 - w2) / (2.0 * delta)
        qs[m] = 2.0 * abs(grad_n) * (sb * sb + tb * tb) ** ((4.0 - sol.alpha) / 8.0)
    mean = float(qs.mean())
    std = float(qs.std())
    return NeumannTrace(
        arc_param=(phi + 0.5 * np.pi) / np.pi,
        q=qs,
        mean=mean,
        std=std,
        cv=std / abs(mean) if mean != 0.0 else np.inf,
    )


# --------------------------------------------------------------------------
# the auxiliary scalar on the grid
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class PFunctionGrid:
    node_indices: np.ndarray
    v: np.ndarray
    boundary_constant: float
    max_deviation: float


def pfunction_on_grid(sol: GridSolution) -> PFunctionGrid:
    """v = 4 (sigma^2+t^2)^((4-alpha)/4) (W_s^2 + W_t^2) - alpha W by
    centered differences at nodes with sigma >= 2h and full stencils;
    reports the worst deviation from the squared Neumann constant."""
    g = sol.grid
    h = g.h
    picks, vs = [], []
    for k in range(g.num_nodes):
        i = int(g.ij[k, 0])
        if i < 2:
            continue
        if g.arm_e[k] < h or g.arm_n[k] < h or g.arm_s[k] < h:
            continue
        east, west = g.neighbor(k, 1, 0), g.neighbor(k, -1, 0)
        north, south = g.neighbor(k, 0, 1), g.neighbor(k, 0, -1)
        if None in (east, west, north, south):
            continue
        ws = (sol.W[east] - sol.W[west]) / (2.0 * h)
        wt = (sol.W[north] - sol.W[south]) / (2.0 * h)
        sig, t = i * h, (g.ij[k, 1] + 0.5) * h
        v = 4.0 * (sig * sig + t * t) ** ((4.0 - sol.alpha) / 4.0) * (
            ws * ws + wt * wt
        ) - sol.alpha * sol.W[k]
        picks.append(k)
        vs.append(v)
    vs = np.array(vs)
    c2 = neumann_trace(sol).mean ** 2
    return PFunctionGrid(
        node_indices=np.array(picks, dtype=np.int64),
        v=vs,
        boundary_constant=float(c2),
        max_deviation=float(np.max(np.abs(vs - c2))),
    )


# --------------------------------------------------------------------------
# integrals, convergence, export
# --------------------------------------------------------------------------


def nodal_integral(sol: GridSolution, values: np.ndarray, node_indices=None) -> float:
    """Cell quadrature of a nodal quantity against the reduced measure
    (omega/2) sigma^(n-1) d sigma d t; the sigma-cell factor is integrated
    exactly."""
    g = sol.grid
    h = g.h
    n = sol.n
    omega = 2.0 * math.pi**n / math.factorial(n - 1)
    sig = g.sigma if node_indices is None else g.sigma[node_indices]
    vals = np.asarray(values, dtype=float)
    lo = np.maximum(sig - 0.5 * h, 0.0)
    hi = sig + 0.5 * h
    w_sigma = (hi**n - lo**n) / n
    return float(0.5 * omega * (vals * w_sigma * h).sum())


_EXACTNESS_FLOOR = 1e-9


@dataclass(frozen=True)
class ConvergenceStudy:
    h_values: list
    max_errors: list
    l2_errors: list
    orders_max: list
    orders_l2: list


def _orders(hs, errs):
    out = []
    for k in range(len(errs) - 1):
        if errs[k + 1] < _EXACTNESS_FLOOR:
            # below the rounding floor of the direct solve: convergence is
            # complete and a decay rate is not measurable
            out.append(math.inf)
        else:
            out.append(math.log(errs[k] / errs[k + 1]) / math.log(hs[k] / hs[k + 1]))
    return out


def convergence_study(
    domain: ReducedDomain, alpha: float, n: int, h_list
) -> ConvergenceStudy:
    """Solve on each grid and measure errors against the gauge-ball
    solution (ball) or against the finest grid (perturbed domains)."""
    hs = sorted(float(h) for h in h_list)[::-1]
    sols = [assemble_and_solve(build_grid(domain, h), alpha, n) for h in hs]
    max_errs, l2_errs = [], []
    if domain.kind == "gauge_ball":
        for sol in sols:
            exact = analytic_solution(sol.grid, alpha, n).W
            e = sol.W - exact
            max_errs.append(float(np.max(np.abs(e))))
            l2_errs.append(_l2_norm(sol, e))
    else:
        ref = sols[-1]
        for sol in sols[:-1]:
            e = np.array(
                [
                    sol.W[k] - _interp(ref, s, t)
                    for k, (s, t) in enumerate(zip(sol.node_sigma, sol.node_t))
                ]
            )
            max_errs.append(float(np.max(np.abs(e))))
            l2_errs.append(_l2_norm(sol, e))
        hs = hs[:-1]
    return ConvergenceStudy(
        h_values=list(hs),
        max_errors=max_errs,
        l2_errors=l2_errs,
        orders_max=_orders(hs, max_errs),
        orders_l2=_orders(hs, l2_errs),
    )


def _l2_norm(sol: GridSolution, e: np.ndarray) -> float:
    return math.sqrt(nodal_integral(sol, e * e))


def solution_to_csv(sol: GridSolution, path):
    write_csv(path, ["sigma", "t", "W"], zip(sol.node_sigma, sol.node_t, sol.W))


def trace_to_csv(trace: NeumannTrace, path):
    write_csv(path, ["arc_param", "q"], zip(trace.arc_param, trace.q))
