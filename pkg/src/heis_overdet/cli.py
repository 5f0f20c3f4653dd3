"""Command-line front end: heis-overdet <verify|check|solve|experiment>.

The only module with side effects.  Every command validates its
configuration before any work starts, writes deterministic JSON/CSV
reports (17-significant-digit floats), renders companion figures next to
the delimited output, and exits 0 on success, 1 on a tolerance failure,
2 on a usage error, 3 on an internal error.

Configuration may come from flags or from an INI-style file (one
``key = value`` per line, one section per command); flags override the
file.  HEIS_OVERDET_THREADS caps worker parallelism.
"""

from __future__ import annotations

import argparse
import configparser
import sys
from pathlib import Path

from . import figures, solver
from . import identities as idl
from . import quadrature as qd
from .domains import ReducedDomain
from .errors import InvalidInputError
from .serialize import write_csv, write_json

EXIT_OK = 0
EXIT_TOLERANCE = 1
EXIT_USAGE = 2
EXIT_INTERNAL = 3


def parse_h(text: str) -> float:
    """Grid spacings accept plain floats and fractions like 1/128."""
    text = str(text).strip()
    if "/" in text:
        num, den = text.split("/", 1)
        return float(num) / float(den)
    return float(text)


def _float_list(text: str):
    return [float(v) for v in str(text).split(",") if v.strip()]


def _h_list(text: str):
    return [parse_h(v) for v in str(text).split(",") if v.strip()]


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="heis-overdet",
        description="Identity verification, integral checks, and the reduced "
        "torsion solver for gauge-ball overdetermined problems.",
    )
    p.add_argument("--config", help="INI config file; flags override it")
    sub = p.add_subparsers(dest="command", required=True)

    v = sub.add_parser(
        "verify",
        help="run pointwise identity suites",
        epilog="outputs: <out>.json (config, summary, reports), <out>.csv "
        "(identity_id,n,alpha,num_points,max_rel_err,tolerance,pass), "
        "<out>.png (error chart); floats use 17 significant digits",
    )
    v.add_argument("--suite", choices=["default"], default=None)
    v.add_argument("--identity", choices=list(idl.IDENTITY_IDS), default=None)
    v.add_argument("--n", type=int, default=None)
    v.add_argument("--alpha", type=float, default=None)
    v.add_argument("--seed", type=int, default=None)
    v.add_argument("--num-points", type=int, default=None)
    v.add_argument("--rho-min", type=float, default=None)
    v.add_argument("--rho-max", type=float, default=None)
    v.add_argument("--simplex-floor", type=float, default=None)
    v.add_argument("--out", default=None, help="JSON report path")
    v.add_argument("--no-figures", action="store_true")

    c = sub.add_parser(
        "check",
        help="quadrature checks of the integral identities",
        epilog="outputs: <out>.json plus <out>.csv with columns "
        "identity,lhs,rhs,residual (pohozaev/average) or "
        "case,pointwise,solid_avg,surface_avg,residual (meanvalue)",
    )
    c.add_argument("kind", choices=["pohozaev", "meanvalue", "average"])
    c.add_argument("--n", type=int, default=None)
    c.add_argument("--alpha", type=float, default=None)
    c.add_argument("--radius", type=float, default=None)
    c.add_argument("--pole-t", type=float, default=None)
    c.add_argument("--source", choices=["analytic", "grid"], default=None)
    c.add_argument("--h", type=parse_h, default=None)
    c.add_argument("--tol", type=float, default=None)
    c.add_argument("--quad-nodes", type=int, default=None)
    c.add_argument("--out", default=None, help="JSON report path")

    s = sub.add_parser(
        "solve",
        help="solve the reduced Dirichlet problem",
        epilog="outputs in --outdir: solution.csv (sigma,t,W), trace.csv "
        "(arc_param,q), metadata.json, solution.png, trace.png",
    )
    s.add_argument("--n", type=int, default=None)
    s.add_argument("--alpha", type=float, default=None)
    s.add_argument("--radius", type=float, default=None)
    s.add_argument("--epsilon", type=float, default=None)
    s.add_argument("--h", type=parse_h, default=None)
    s.add_argument("--trace-samples", type=int, default=None)
    s.add_argument("--outdir", default=None)
    s.add_argument("--no-figures", action="store_true")

    e = sub.add_parser(
        "experiment",
        help="perturbation sweeps and convergence studies",
        epilog="outputs in --outdir: perturbation.csv (epsilon,cv,mean_q) "
        "or convergence.csv (alpha,h,max_err,l2_err,order_max,order_l2), "
        "with matching .png figures",
    )
    e.add_argument("kind", choices=["perturbation", "convergence"])
    e.add_argument("--n", type=int, default=None)
    e.add_argument("--alpha", type=float, default=None)
    e.add_argument("--alphas", type=_float_list, default=None)
    e.add_argument("--radius", type=float, default=None)
    e.add_argument("--epsilons", type=_float_list, default=None)
    e.add_argument("--h", type=parse_h, default=None)
    e.add_argument("--hs", type=_h_list, default=None)
    e.add_argument("--outdir", default=None)
    e.add_argument("--no-figures", action="store_true")
    return p


_DEFAULTS = {
    "verify": {
        "seed": 20240901,
        "num_points": 1000,
        "rho_min": 0.1,
        "rho_max": 10.0,
        "simplex_floor": 0.01,
        "alpha": 2.0,
        "n": 1,
        "out": "verify_report.json",
    },
    "check": {
        "n": 1,
        "alpha": 2.0,
        "radius": 1.0,
        "source": "analytic",
        "quad_nodes": 20,
        "out": "check_report.json",
    },
    "solve": {
        "n": 1,
        "alpha": 2.0,
        "radius": 1.0,
        "epsilon": 0.0,
        "h": 1.0 / 64.0,
        "trace_samples": 129,
        "outdir": "solve_out",
    },
    "experiment": {
        "n": 1,
        "alpha": 2.0,
        "radius": 1.0,
        "h": 1.0 / 128.0,
        "epsilons": [0.05, 0.1, 0.2],
        "alphas": [2.0, 4.0],
        "hs": [1.0 / 32.0, 1.0 / 64.0, 1.0 / 128.0],
        "outdir": "experiment_out",
    },
}

_CONVERTERS = {
    "h": parse_h,
    "hs": _h_list,
    "epsilons": _float_list,
    "alphas": _float_list,
    "seed": int,
    "num_points": int,
    "n": int,
    "quad_nodes": int,
    "trace_samples": int,
    "no_figures": lambda s: s.strip().lower() in ("1", "true", "yes", "on"),
}


def _merge_config(args: argparse.Namespace) -> dict:
    """defaults < config file < explicit flags."""
    cmd = args.command
    merged = dict(_DEFAULTS[cmd])
    if args.config:
        ini = configparser.ConfigParser(inline_comment_prefixes=("#", ";"))
        if not ini.read(args.config):
            raise InvalidInputError(f"cannot read config file {args.config!r}")
        if ini.has_section(cmd):
            for key, raw in ini.items(cmd):
                key = key.replace("-", "_")
                conv = _CONVERTERS.get(key, float)
                if key in ("out", "outdir", "suite", "identity", "kind", "source"):
                    conv = str
                merged[key] = conv(raw)
    for key, val in vars(args).items():
        if key in ("config", "command"):
            continue
        if isinstance(val, bool):
            merged[key] = val
        elif val is not None:
            merged[key] = val
    return merged


# --------------------------------------------------------------------------
# commands
# --------------------------------------------------------------------------


def cmd_verify(cfg: dict) -> int:
    sample = idl.SampleConfig(
        seed=cfg["seed"],
        num_points=cfg["num_points"],
        rho_range=(cfg["rho_min"], cfg["rho_max"]),
        simplex_floor=cfg["simplex_floor"],
    )
    if cfg.get("identity"):
        grid = [(cfg["identity"], cfg["n"], cfg["alpha"])]
    else:
        grid = idl.default_grid()
    reports, summary = idl.run_suite(grid, sample)
    out = Path(cfg["out"])
    out.parent.mkdir(parents=True, exist_ok=True)
    write_json(out, idl.suite_to_dict(reports, summary, sample))
    write_csv(
        out.with_suffix(".csv"),
        ["identity_id", "n", "alpha", "num_points", "max_rel_err", "tolerance", "pass"],
        [
            (r.identity_id, r.n, r.alpha, r.num_points, r.max_rel_err, r.tolerance, r.passed)
            for r in reports
        ],
    )
    if not cfg.get("no_figures"):
        figures.verify_figure(reports, out.with_suffix(".png"))
    for r in reports:
        state = "pass" if r.passed else "FAIL"
        print(
            f"[{state}] {r.identity_id} n={r.n} alpha={r.alpha:g} "
            f"max_rel_err={r.max_rel_err:.3e} tol={r.tolerance:g}"
        )
    print(f"summary: {'pass' if summary['pass'] else 'FAIL'} ({summary['num_reports']} reports)")
    return EXIT_OK if summary["pass"] else EXIT_TOLERANCE


def cmd_check(cfg: dict) -> int:
    spec = qd.QuadratureSpec(nodes=cfg["quad_nodes"])
    n, R = cfg["n"], cfg["radius"]
    kind = cfg["kind"]
    out = Path(cfg["out"])
    out.parent.mkdir(parents=True, exist_ok=True)
    if kind == "pohozaev":
        tol = cfg.get("tol") or 1e-8
        alpha = cfg["alpha"]
        if not alpha > 0.0:
            raise InvalidInputError("alpha must be positive")
        rep = qd.pohozaev_check(alpha, n, R, _check_source(cfg, n, R), spec)
        residuals = [rep["residual"]] + [s["residual"] for s in rep["sub_identities"]]
        ok = all(r <= tol for r in residuals)
        rep.update({"tolerance": tol, "pass": ok, "n": n, "alpha": alpha, "radius": R})
        write_json(out, rep)
        rows = [("main", rep["lhs"], rep["rhs"], rep["residual"])] + [
            (s["name"], s["lhs"], s["rhs"], s["residual"]) for s in rep["sub_identities"]
        ]
        write_csv(out.with_suffix(".csv"), ["identity", "lhs", "rhs", "residual"], rows)
        print(f"pohozaev n={n} alpha={alpha:g}: residual={rep['residual']:.3e} "
              f"({'pass' if ok else 'FAIL'} at {tol:g})")
        return EXIT_OK if ok else EXIT_TOLERANCE
    if kind == "meanvalue":
        tol = cfg.get("tol") or 1e-5
        pole = cfg.get("pole_t")
        if pole is None:
            raise InvalidInputError("check meanvalue requires --pole-t")
        if abs(pole) <= R * R:
            raise InvalidInputError("the pole must lie outside the ball: |pole_t| > R^2")
        cal = qd.calibrate_beta(n, R, spec)
        rows, entries = [], []
        from .reduced import CylindricalProfile

        cases = [
            ("constant", CylindricalProfile("one", lambda c: c[0] * 0.0 + 1.0), 1e-6),
            ("odd", CylindricalProfile("t", lambda c: c[-1] + 0.0), None),
            ("exterior_pole", qd.fundamental_profile(n, pole), tol),
        ]
        ok = cal.residual <= 1e-8
        for name, prof, case_tol in cases:
            mv = qd.mean_value_check(prof, n, R, spec, beta=cal.beta_hat)
            scale = max(abs(mv["pointwise"]), 1.0)
            res = max(
                abs(mv["solid_avg"] - mv["pointwise"]), abs(mv["surface_avg"] - mv["pointwise"])
            ) / scale
            if case_tol is not None:
                ok = ok and res <= case_tol
            rows.append((name, mv["pointwise"], mv["solid_avg"], mv["surface_avg"], res))
            entries.append({"case": name, **{k: mv[k] for k in ("pointwise", "solid_avg", "surface_avg")}, "residual": res})
        rep = {
            "n": n,
            "radius": R,
            "pole_t": pole,
            "beta_hat": cal.beta_hat,
            "beta_residual": cal.residual,
            "cases": entries,
            "tolerance": tol,
            "pass": ok,
        }
        write_json(out, rep)
        write_csv(
            out.with_suffix(".csv"),
            ["case", "pointwise", "solid_avg", "surface_avg", "residual"],
            rows,
        )
        print(f"meanvalue n={n}: beta={cal.beta_hat:.12g} "
              f"worst residual={max(r[-1] for r in rows):.3e} ({'pass' if ok else 'FAIL'})")
        return EXIT_OK if ok else EXIT_TOLERANCE
    # average
    tol = cfg.get("tol") or 1e-8
    alpha = cfg["alpha"]
    if not alpha > 0.0:
        raise InvalidInputError("alpha must be positive")
    rep = qd.average_identity_check(alpha, n, R, _check_source(cfg, n, R), spec)
    ok = rep["residual"] <= tol
    rep.update({"tolerance": tol, "pass": ok, "n": n, "alpha": alpha, "radius": R})
    write_json(out, rep)
    write_csv(
        out.with_suffix(".csv"),
        ["identity", "lhs", "rhs", "residual"],
        [("weighted_average", rep["lhs"], rep["rhs"], rep["residual"])],
    )
    print(f"average n={n} alpha={alpha:g}: residual={rep['residual']:.3e} "
          f"({'pass' if ok else 'FAIL'} at {tol:g})")
    return EXIT_OK if ok else EXIT_TOLERANCE


def _check_source(cfg: dict, n: int, R: float):
    if cfg.get("source", "analytic") == "analytic":
        return "analytic"
    dom = ReducedDomain("gauge_ball", R, 0.0)
    grid = solver.build_grid(dom, cfg.get("h") or 1.0 / 64.0)
    return solver.assemble_and_solve(grid, cfg["alpha"], n)


def cmd_solve(cfg: dict) -> int:
    n, alpha, R, eps, h = cfg["n"], cfg["alpha"], cfg["radius"], cfg["epsilon"], cfg["h"]
    dom = ReducedDomain("gauge_ball" if eps == 0.0 else "perturbed", R, eps)
    sol = solver.assemble_and_solve(solver.build_grid(dom, h), alpha, n)
    trace = solver.neumann_trace(sol, num_samples=cfg["trace_samples"])
    outdir = Path(cfg["outdir"])
    outdir.mkdir(parents=True, exist_ok=True)
    solver.solution_to_csv(sol, outdir / "solution.csv")
    solver.trace_to_csv(trace, outdir / "trace.csv")
    meta = sol.metadata()
    meta.update(
        {
            "q_mean": trace.mean,
            "q_std": trace.std,
            "q_cv": trace.cv,
            "gauge_ball_q": R ** (alpha / 2.0),
        }
    )
    write_json(outdir / "metadata.json", meta)
    if not cfg.get("no_figures"):
        figures.solution_figure(sol, outdir / "solution.png")
        figures.trace_figure(trace, R ** (alpha / 2.0), outdir / "trace.png")
    print(
        f"solved n={n} alpha={alpha:g} eps={eps:g} h={h:g}: {sol.grid.num_nodes} nodes, "
        f"mean q={trace.mean:.6f} (gauge ball: {R ** (alpha / 2.0):.6f}), CV={trace.cv:.3e}"
    )
    return EXIT_OK


def cmd_experiment(cfg: dict) -> int:
    outdir = Path(cfg["outdir"])
    outdir.mkdir(parents=True, exist_ok=True)
    n, R = cfg["n"], cfg["radius"]
    if cfg["kind"] == "perturbation":
        alpha, h = cfg["alpha"], cfg["h"]
        rows = []
        for eps in cfg["epsilons"]:
            dom = ReducedDomain("gauge_ball" if eps == 0.0 else "perturbed", R, eps)
            sol = solver.assemble_and_solve(solver.build_grid(dom, h), alpha, n)
            tr = solver.neumann_trace(sol)
            rows.append((eps, tr.cv, tr.mean))
            print(f"eps={eps:g}: CV={tr.cv:.4e} mean q={tr.mean:.6f}")
        write_csv(outdir / "perturbation.csv", ["epsilon", "cv", "mean_q"], rows)
        if not cfg.get("no_figures"):
            figures.perturbation_figure([r[0] for r in rows], [r[1] for r in rows],
                                        outdir / "perturbation.png")
        return EXIT_OK
    # convergence
    dom = ReducedDomain("gauge_ball", R, 0.0)
    studies, rows = {}, []
    for alpha in cfg["alphas"]:
        st = solver.convergence_study(dom, alpha, n, cfg["hs"])
        studies[alpha] = st
        for k, h in enumerate(st.h_values):
            rows.append(
                (
                    alpha,
                    h,
                    st.max_errors[k],
                    st.l2_errors[k],
                    st.orders_max[k - 1] if k else float("nan"),
                    st.orders_l2[k - 1] if k else float("nan"),
                )
            )
        print(f"alpha={alpha:g}: max orders {st.orders_max}, L2 orders {st.orders_l2}")
    write_csv(
        outdir / "convergence.csv",
        ["alpha", "h", "max_err", "l2_err", "order_max", "order_l2"],
        rows,
    )
    if not cfg.get("no_figures"):
        figures.convergence_figure(studies, outdir / "convergence.png")
    return EXIT_OK


_COMMANDS = {
    "verify": cmd_verify,
    "check": cmd_check,
    "solve": cmd_solve,
    "experiment": cmd_experiment,
}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        cfg = _merge_config(args)
        return _COMMANDS[args.command](cfg)
    except InvalidInputError as exc:
        print(f"error: {exc}", file=sys.stderr)
        print(f"run `heis-overdet {args.command} --help` for usage", file=sys.stderr)
        return EXIT_USAGE
    except Exception as exc:  # noqa: BLE001 - contract: any failure is exit 3
        print(f"internal error: {exc}", file=sys.stderr)
        return EXIT_INTERNAL


if __name__ == "__main__":
    sys.exit(main())
