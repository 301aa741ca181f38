"""Figure rendering for the CLI report paths (headless, file output)."""

from __future__ import annotations

import numpy as np

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt


def save_sensitivity_figure(m_blocks, path, L=None, title=None):
    """Per-phase traces of m_n against the level n, zero line included."""
    blocks = np.asarray(m_blocks)
    fig, ax = plt.subplots(figsize=(7, 4.5))
    markers = ["+", "*", "o", "s", "d"]
    for j in range(blocks.shape[1]):
        ax.plot(range(blocks.shape[0]), blocks[:, j],
                marker=markers[j % len(markers)],
                label=f"phase {j + 1}")
    ax.axhline(0.0, color="gray", lw=0.8)
    if L is not None:
        ax.axvline(L, color="gray", lw=0.8, ls="--", label=f"L = {L:.3g}")
    ax.set_xlabel("level n")
    ax.set_ylabel("m")
    if title:
        ax.set_title(title)
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
    return path


def save_sweep_figure(rows, path, title=None):
    """Expected queue length L as a function of the traffic coefficient."""
    ok = [(r.rho, r.L) for r in rows if r.error is None]
    fig, ax = plt.subplots(figsize=(7, 4.5))
    if ok:
        rho, L = zip(*sorted(ok))
        ax.plot(rho, L, marker="o")
    ax.set_xlabel("traffic coefficient rho")
    ax.set_ylabel("expected queue length L")
    if title:
        ax.set_title(title)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
    return path


def save_poisson_figure(h_blocks, path, title=None):
    """Per-phase traces of the bias vector h against the level."""
    blocks = np.asarray(h_blocks)
    fig, ax = plt.subplots(figsize=(7, 4.5))
    for j in range(blocks.shape[1]):
        ax.plot(range(blocks.shape[0]), blocks[:, j], marker=".",
                label=f"phase {j + 1}")
    ax.axhline(0.0, color="gray", lw=0.8)
    ax.set_xlabel("level n")
    ax.set_ylabel("h")
    if title:
        ax.set_title(title)
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
    return path
