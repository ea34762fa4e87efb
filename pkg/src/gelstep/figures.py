"""Report figures rendered straight to files.

Everything here uses the Agg backend so runs stay headless; each
function writes one PNG next to the delimited output and returns the
path it wrote.
"""

from __future__ import annotations

import os

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402  (backend must be set first)
import numpy as np  # noqa: E402

from . import tensors  # noqa: E402


def plot_energy(records, path: str) -> str:
    """Energy breakdown and the two sides of the dissipation ledger."""
    t = np.array([r.t for r in records])
    fig, (ax1, ax2) = plt.subplots(2, 1, figsize=(7.0, 6.0), sharex=True)

    for name, label in (
        ("f_el", "elastic"),
        ("f_pf", "phase"),
        ("f_hy", "second gradient"),
        ("total", "total"),
    ):
        ax1.plot(t, [getattr(r, name) for r in records], label=label)
    ax1.set_ylabel("free energy")
    ax1.legend(loc="best", fontsize=8)
    ax1.grid(alpha=0.3)

    ax2.plot(t, [r.edi_lhs for r in records], label="energy + dissipation")
    ax2.plot(t, [r.edi_rhs for r in records], "--", label="initial + power")
    ax2.set_xlabel("t")
    ax2.set_ylabel("ledger")
    ax2.legend(loc="best", fontsize=8)
    ax2.grid(alpha=0.3)

    fig.tight_layout()
    fig.savefig(path, dpi=130)
    plt.close(fig)
    return path


def _plane_slice(field, d):
    """Reduce a nodal field to its first two axes (middle slice in 3d)."""
    if d == 2:
        return field
    mid = field.shape[-1] // 2
    return field[..., mid]


def plot_state(state, family, path: str) -> str:
    """Concentration on the deformed configuration plus det(grad y)."""
    grid = state.grid
    d = grid.d
    v = family.value(state.t, state.y)
    det = tensors.mat_det(grid.grad(state.y))

    vx = _plane_slice(v[0], d)
    vy = _plane_slice(v[1], d)
    psi = _plane_slice(state.psi, d)
    det2 = _plane_slice(det, d)

    fig, (ax1, ax2) = plt.subplots(1, 2, figsize=(9.0, 4.0))
    m1 = ax1.pcolormesh(vx, vy, psi, shading="gouraud", cmap="RdBu_r",
                        vmin=-1.05, vmax=1.05)
    ax1.set_title(f"psi at t = {state.t:.4g}")
    ax1.set_aspect("equal")
    fig.colorbar(m1, ax=ax1, shrink=0.85)

    m2 = ax2.pcolormesh(vx, vy, det2, shading="gouraud", cmap="viridis")
    ax2.set_title("det(grad y)")
    ax2.set_aspect("equal")
    fig.colorbar(m2, ax=ax2, shrink=0.85)

    fig.tight_layout()
    fig.savefig(path, dpi=130)
    plt.close(fig)
    return path


def plot_refinement(rows, path: str) -> str:
    """Hat-interpolant distances against the coarse step count."""
    M = [row["M_coarse"] for row in rows]
    dy = [row["dist_h1_y"] for row in rows]
    dpsi = [row["dist_h1_psi"] for row in rows]
    fig, ax = plt.subplots(figsize=(5.5, 4.0))
    # A stationary run has exactly zero distances, which log axes reject.
    scale = "log" if max(dy + dpsi, default=0.0) > 0.0 else "linear"
    ax.set_xscale("log")
    ax.set_yscale(scale)
    ax.plot(M, dy, "o-", label="H1 distance, y")
    ax.plot(M, dpsi, "s-", label="H1 distance, psi")
    ax.set_xlabel("M (coarse rung)")
    ax.set_ylabel("distance to next rung")
    ax.grid(alpha=0.3, which="both")
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, dpi=130)
    plt.close(fig)
    return path


def render_report_figures(traj, out_dir: str) -> list[str]:
    """The standard report set: ledger plot, initial and final states."""
    os.makedirs(out_dir, exist_ok=True)
    paths = [
        plot_energy(traj.records, os.path.join(out_dir, "energy.png")),
        plot_state(traj.states[0], traj.family, os.path.join(out_dir, "state_initial.png")),
        plot_state(traj.states[-1], traj.family, os.path.join(out_dir, "state_final.png")),
    ]
    return paths
