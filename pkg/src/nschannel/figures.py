"""Report figures rendered next to the diagnostics CSV."""

from __future__ import annotations

import os

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

from .io import read_diagnostics_csv  # noqa: E402


def render_report(csv_path, outdir=None):
    """Render energy, mass and dissipation figures from a diagnostics CSV.

    Returns the list of written figure paths (PNG, same directory as the
    CSV unless outdir is given).
    """
    outdir = outdir or os.path.dirname(os.path.abspath(csv_path))
    header, data = read_diagnostics_csv(csv_path)
    col = {name: data[:, i] for i, name in enumerate(header)}
    t = col["t"]
    written = []

    fig, ax = plt.subplots(figsize=(6.0, 4.0))
    for name in ("E_kin", "E_bulk", "E_surf", "E_total"):
        ax.plot(t, col[name], label=name.replace("_", " "))
    ax.set_xlabel("t")
    ax.set_ylabel("energy")
    ax.legend(frameon=False)
    ax.set_title("Energy components")
    path = os.path.join(outdir, "energy.png")
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
    written.append(path)

    fig, axes = plt.subplots(1, 2, figsize=(9.0, 4.0))
    for name in ("M_bulk", "M_surf", "M_weighted"):
        axes[0].plot(t, col[name], label=name.replace("_", " "))
    axes[0].set_xlabel("t")
    axes[0].set_ylabel("mass")
    axes[0].legend(frameon=False)
    axes[0].set_title("Mass components")
    drift = np.abs(col["M_weighted"] - col["M_weighted"][0])
    axes[1].semilogy(t, np.maximum(drift, 1e-18))
    axes[1].set_xlabel("t")
    axes[1].set_ylabel("|weighted mass drift|")
    axes[1].set_title("Conservation check")
    path = os.path.join(outdir, "mass.png")
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
    written.append(path)

    fig, ax = plt.subplots(figsize=(6.0, 4.0))
    for name in ("D_visc", "D_fric", "D_bulk", "D_surf", "D_robin"):
        vals = np.maximum(np.abs(col[name]), 1e-18)
        ax.semilogy(t, vals, label=name.replace("_", " "))
    ax.set_xlabel("t")
    ax.set_ylabel("dissipation rate")
    ax.legend(frameon=False, ncol=2)
    ax.set_title("Dissipation channels")
    path = os.path.join(outdir, "dissipation.png")
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
    written.append(path)

    return written
