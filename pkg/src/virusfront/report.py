"""Figure rendering for the CLI report paths.

Every command that writes delimited output can also drop matplotlib
figures next to it.  Rendering is deliberately decoupled from the solvers:
functions here take finished result objects and an output directory and
return the list of files written.
"""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402

from .behavior import ClassificationResult
from .equilibrium import EquilibriumChain, HalfLineSolution
from .fbsim import Trajectory
from .model import ubar1_closed_form

__all__ = [
    "render_trajectory",
    "render_chain",
    "render_classification",
    "render_sweep",
]

_SPECIES = ("u1 (uninfected)", "u2 (infected)", "u3 (virus)")
_COLORS = ("tab:blue", "tab:orange", "tab:red")


def _save(fig, outdir: Path, name: str) -> Path:
    path = Path(outdir) / name
    fig.savefig(path, dpi=150, bbox_inches="tight")
    plt.close(fig)
    return path


def render_trajectory(traj: Trajectory, outdir) -> list[Path]:
    """Front position/speed, sup-norm history and the final profile."""
    written = []

    fig, (ax1, ax2) = plt.subplots(2, 1, figsize=(6.4, 6.0), sharex=True)
    ax1.plot(traj.t, traj.h, color="k")
    ax1.set_ylabel("front position h(t)")
    ax2.plot(traj.t, traj.h_prime, color="k")
    ax2.set_ylabel("front speed h'(t)")
    ax2.set_xlabel("t")
    ax1.set_title("front expansion")
    written.append(_save(fig, outdir, "fig_front.png"))

    fig, ax = plt.subplots(figsize=(6.4, 4.2))
    for i in range(3):
        ax.plot(traj.t, traj.sup[i], label=_SPECIES[i], color=_COLORS[i])
    ax.set_yscale("log")
    ax.set_xlabel("t")
    ax.set_ylabel("sup-norm")
    ax.legend()
    ax.set_title("sup-norm history")
    written.append(_save(fig, outdir, "fig_supnorms.png"))

    snap = traj.final_snapshot
    fig, ax = plt.subplots(figsize=(6.4, 4.2))
    for i in range(3):
        ax.plot(snap.x, snap.U[i], label=_SPECIES[i], color=_COLORS[i])
    ax.set_xlabel("x")
    ax.set_ylabel("density")
    ax.set_title(f"profiles at t = {snap.t:g} (h = {snap.h:.4g})")
    ax.legend()
    written.append(_save(fig, outdir, "fig_final_profile.png"))
    return written


def _plot_link(ax, sol: HalfLineSolution, labels):
    xs = sol.profile.grid.nodes
    for i in range(sol.profile.ncomp):
        ax.plot(xs, sol.profile.values[i], label=labels[i])
        ax.axhline(sol.farfield[i], ls=":", lw=0.8, color="gray")
    ax.set_xlabel("x")
    ax.legend(fontsize=8)


def render_chain(chain: EquilibriumChain, outdir) -> list[Path]:
    """All chain links on the window with their far-field asymptotes."""
    fig, axes = plt.subplots(2, 2, figsize=(9.6, 7.2))
    _plot_link(axes[0, 0], chain.upper_u1, ["upper u1"])
    axes[0, 0].set_title("cells, generous bound")
    _plot_link(axes[0, 1], chain.upper_u23, ["upper u2", "upper u3"])
    axes[0, 1].set_title("pair, generous bound")
    _plot_link(axes[1, 0], chain.lower_u1, ["lower u1"])
    axes[1, 0].set_title("cells, suppressed bound")
    if chain.complete:
        _plot_link(axes[1, 1], chain.lower_u23, ["lower u2", "lower u3"])
        axes[1, 1].set_title("pair, depleted bound")
    else:
        axes[1, 1].text(0.5, 0.5, "strengthened threshold fails:\nno lower pair",
                        ha="center", va="center")
        axes[1, 1].set_axis_off()
    fig.suptitle(f"equilibrium bound chain (R0 = {chain.r0:.4g})")
    fig.tight_layout()
    return [_save(fig, outdir, "fig_chain.png")]


def render_classification(
    result: ClassificationResult,
    traj: Trajectory,
    chain: EquilibriumChain | None,
    outdir,
) -> list[Path]:
    """Final profiles against the bounds that decided the regime."""
    snap = traj.final_snapshot
    fig, axes = plt.subplots(1, 3, figsize=(12.0, 3.8), sharex=True)
    p = traj.params
    window = chain.upper_u1.window if chain is not None else 10.0
    for i, ax in enumerate(axes):
        sel = snap.x <= window
        ax.plot(snap.x[sel], snap.U[i, sel], color=_COLORS[i], label="simulated")
        ax.set_title(_SPECIES[i])
        ax.set_xlabel("x")
    if chain is not None:
        xs = chain.upper_u1.profile.grid.nodes
        axes[0].plot(xs, chain.upper_u1.profile.values[0], "k--", lw=0.9, label="upper")
        axes[0].plot(xs, chain.lower_u1.profile.values[0], "k:", lw=0.9, label="lower")
        axes[1].plot(xs, chain.upper_u23.profile.values[0], "k--", lw=0.9, label="upper")
        axes[2].plot(xs, chain.upper_u23.profile.values[1], "k--", lw=0.9, label="upper")
        if chain.complete:
            axes[1].plot(xs, chain.lower_u23.profile.values[0], "k:", lw=0.9, label="lower")
            axes[2].plot(xs, chain.lower_u23.profile.values[1], "k:", lw=0.9, label="lower")
    else:
        xs = snap.x[snap.x <= window]
        axes[0].plot(xs, ubar1_closed_form(p, p.d1, xs), "k--", lw=0.9,
                     label="virus-free profile")
    for ax in axes:
        ax.legend(fontsize=8)
    fig.suptitle(f"regime: {result.regime} (R0 = {result.r0:.4g})")
    fig.tight_layout()
    return [_save(fig, outdir, "fig_classification.png")]


def render_sweep(rows: list[dict], axis_names: list[str], outdir) -> list[Path]:
    """Regime markers along the first sweep axis, colored by verdict."""
    if not rows or not axis_names:
        return []
    axis = axis_names[0]
    styles = {
        "Extinction": ("o", "tab:blue"),
        "PersistenceUnverified": ("s", "tab:orange"),
        "PersistenceVerified": ("^", "tab:red"),
    }
    fig, ax = plt.subplots(figsize=(6.4, 4.2))
    for regime, (marker, color) in styles.items():
        xs = [r[axis] for r in rows if r["regime"] == regime]
        ys = [r["R0"] for r in rows if r["regime"] == regime]
        if xs:
            ax.plot(xs, ys, marker, color=color, label=regime)
    ax.axhline(1.0, color="gray", ls=":", lw=0.8)
    ax.set_xlabel(axis)
    ax.set_ylabel("R0")
    ax.set_title(f"regimes along the {axis} sweep")
    ax.legend(fontsize=8)
    return [_save(fig, outdir, "fig_sweep.png")]
