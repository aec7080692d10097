"""Optional SVG renderings of the CSV data (needs matplotlib)."""
from __future__ import annotations

from pathlib import Path

import numpy as np


def _pyplot():
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    return plt


def plot_magnitude(table, path, title=None) -> Path:
    plt = _pyplot()
    fig, ax = plt.subplots(figsize=(6, 3.5))
    ax.semilogx(table[:, 0], table[:, 1])
    ax.axhline(1.0, color="k", lw=0.6, ls="--")
    ax.set_xlabel(r"$\omega$ (rad/s)")
    ax.set_ylabel(r"$|\tilde H(j\omega;\tau_0)|$")
    if title:
        ax.set_title(title)
    fig.tight_layout()
    fig.savefig(path)
    plt.close(fig)
    return Path(path)


def plot_spacing_errors(traj, path, title=None) -> Path:
    plt = _pyplot()
    fig, ax = plt.subplots(figsize=(6, 3.5))
    for i in range(traj.n_followers):
        ax.plot(traj.t, traj.delta[:, i], lw=0.8, label=rf"$\delta_{{{i + 1}}}$")
    ax.set_xlabel("t (s)")
    ax.set_ylabel(r"$\delta_i$ (m)")
    ax.legend(ncol=4, fontsize=6)
    if title:
        ax.set_title(title)
    fig.tight_layout()
    fig.savefig(path)
    plt.close(fig)
    return Path(path)


def plot_region(region, path, box=None, point=None) -> Path:
    plt = _pyplot()
    fig, ax = plt.subplots(figsize=(5, 4))
    kp_hi = box[1] if box else 1.1 * max(region.b1, region.b2)
    kv_hi = box[3] if box else 1.1 * max(region.a1, region.a2)
    kp = np.linspace(0, kp_hi, 200)
    ax.plot(kp, region.a1 * (1 - kp / region.b1), label="S1 boundary")
    ax.plot(kp, region.a2 * (1 - kp / region.b2), label="S2 boundary")
    poly = region.polygon(box)
    if len(poly):
        ax.fill(poly[:, 0], poly[:, 1], alpha=0.35, label="S")
    if point is not None:
        ax.plot(*point, "k*", ms=8)
    ax.set_xlim(0, kp_hi)
    ax.set_ylim(0, kv_hi)
    ax.set_xlabel(r"$k_p$")
    ax.set_ylabel(r"$k_v$")
    ax.legend(fontsize=7)
    fig.tight_layout()
    fig.savefig(path)
    plt.close(fig)
    return Path(path)
