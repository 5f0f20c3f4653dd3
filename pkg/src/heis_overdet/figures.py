"""Figure rendering for the CLI report paths.

Figures are a convenience rendering of the delimited outputs, never the
canonical data.  The Agg backend and fixed PNG metadata keep the emitted
bytes deterministic for a fixed seed."""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

_SAVEOPTS = dict(dpi=130, metadata={"Software": "heis-overdet"})


def _save(fig, path):
    fig.savefig(path, **_SAVEOPTS)
    plt.close(fig)


def verify_figure(reports, path):
    """Worst relative error vs tolerance, aggregated per identity."""
    agg = {}
    for r in reports:
        cur = agg.setdefault(r.identity_id, [0.0, np.inf])
        cur[0] = max(cur[0], r.max_rel_err)
        cur[1] = min(cur[1], r.tolerance)
    names = list(agg)
    errs = [max(agg[k][0], 1e-18) for k in names]
    tols = [agg[k][1] for k in names]
    fig, ax = plt.subplots(figsize=(7.0, 0.45 * len(names) + 1.2))
    y = np.arange(len(names))
    ax.barh(y, errs, color="#4878a8", label="worst relative error")
    ax.plot(tols, y, "r|", markersize=14, label="tolerance")
    ax.set_yticks(y, names)
    ax.set_xscale("log")
    ax.set_xlabel("relative error")
    ax.invert_yaxis()
    ax.legend(loc="lower right", fontsize=8)
    fig.tight_layout()
    _save(fig, path)


def solution_figure(sol, path):
    """Filled rendering of W over the reduced domain."""
    fig, ax = plt.subplots(figsize=(6.4, 5.2))
    sc = ax.tripcolor(sol.node_sigma, sol.node_t, sol.W, shading="gouraud")
    fig.colorbar(sc, ax=ax, label="W")
    ax.set_xlabel(r"$\sigma$")
    ax.set_ylabel("t")
    ax.set_title(
        f"torsion profile  (alpha={sol.alpha:g}, n={sol.n}, "
        f"eps={sol.grid.domain.epsilon:g}, h={sol.grid.h:g})"
    )
    ax.set_aspect("equal")
    fig.tight_layout()
    _save(fig, path)


def trace_figure(trace, expected, path):
    fig, ax = plt.subplots(figsize=(6.4, 4.0))
    ax.plot(trace.arc_param, trace.q, "-", color="#4878a8", lw=1.2, label="q")
    ax.axhline(trace.mean, color="k", ls=":", lw=1, label=f"mean = {trace.mean:.6g}")
    if expected is not None:
        ax.axhline(expected, color="r", ls="--", lw=1, label=f"gauge-ball value {expected:.6g}")
    ax.set_xlabel("arc parameter")
    ax.set_ylabel("Neumann ratio q")
    ax.set_title(f"boundary Neumann ratio (CV = {trace.cv:.3e})")
    ax.legend(fontsize=8)
    fig.tight_layout()
    _save(fig, path)


def perturbation_figure(epsilons, cvs, path):
    fig, ax = plt.subplots(figsize=(6.0, 4.2))
    ax.plot(epsilons, cvs, "o-", color="#4878a8")
    ax.set_xlabel("domain perturbation")
    ax.set_ylabel("CV of Neumann ratio")
    ax.set_title("symmetry breaking: boundary-ratio spread vs perturbation")
    ax.grid(alpha=0.3)
    fig.tight_layout()
    _save(fig, path)


def convergence_figure(studies, path):
    """studies: dict alpha -> ConvergenceStudy."""
    fig, ax = plt.subplots(figsize=(6.0, 4.4))
    for alpha, st in studies.items():
        hs = np.array(st.h_values)
        ax.loglog(hs, np.maximum(st.max_errors, 1e-18), "o-", label=f"max err, alpha={alpha:g}")
        ax.loglog(hs, np.maximum(st.l2_errors, 1e-18), "s--", label=f"L2 err, alpha={alpha:g}")
    hs = np.array(sorted({h for st in studies.values() for h in st.h_values}))
    if hs.size:
        ref = hs**2 * max(
            max(st.max_errors) for st in studies.values()
        ) / max(hs) ** 2
        ax.loglog(hs, np.maximum(ref, 1e-18), "k:", lw=1, label="h^2 reference")
    ax.set_xlabel("h")
    ax.set_ylabel("error")
    ax.set_title("grid convergence")
    ax.legend(fontsize=8)
    ax.grid(alpha=0.3, which="both")
    fig.tight_layout()
    _save(fig, path)
