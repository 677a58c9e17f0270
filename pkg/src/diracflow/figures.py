"""Figure rendering for the report path: PNG files next to the CSV tables."""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np


def _save(fig, out_dir, name):
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    path = out_dir / name
    fig.savefig(path, dpi=130, bbox_inches="tight")
    plt.close(fig)
    return path


def plot_tracks(tracks, partition, out_dir, name="tracks.png"):
    fig, ax = plt.subplots(figsize=(7, 4.5))
    for j in range(tracks.n_tracks):
        ax.plot(tracks.s_grid, tracks.values[:, j], lw=0.8)
    ax.axhline(0.0, color="k", lw=0.6)
    if partition is not None:
        for j in range(partition.n_segments):
            s0 = partition.breakpoints_s[j]
            s1 = partition.breakpoints_s[j + 1]
            ax.hlines(partition.thresholds[j], s0, s1, colors="crimson", lw=1.4)
        for s in partition.breakpoints_s:
            ax.axvline(s, color="gray", lw=0.5, ls=":")
    ax.set_xlabel("compactified time s")
    ax.set_ylabel("eigenvalue")
    ax.set_title("eigenvalue tracks and flow thresholds")
    return _save(fig, out_dir, name)


def plot_residual_ladder(horizons, residuals, slope, out_dir, name="moller_residuals.png"):
    fig, ax = plt.subplots(figsize=(6, 4))
    horizons = np.asarray(horizons, dtype=float)
    residuals = np.asarray(residuals, dtype=float)
    keep = residuals > 0
    ax.loglog(horizons[keep], residuals[keep], "o-", label="Cauchy residual")
    if np.isfinite(slope) and np.count_nonzero(keep):
        ref = residuals[keep][0] * (horizons[keep] / horizons[keep][0]) ** slope
        ax.loglog(horizons[keep], ref, "--", label=f"slope {slope:.2f}")
    ax.set_xlabel("horizon T")
    ax.set_ylabel("|| W(0,T) - W(0,T/2) ||")
    ax.legend()
    ax.set_title("wave-operator convergence")
    return _save(fig, out_dir, name)


def plot_singular_values(singulars, out_dir, name="block_singulars.png", title="block singular values"):
    fig, ax = plt.subplots(figsize=(6, 4))
    s = np.asarray(singulars, dtype=float)
    ax.semilogy(np.arange(1, len(s) + 1), np.maximum(s, 1e-20), "s-")
    ax.set_xlabel("k")
    ax.set_ylabel("sigma_k")
    ax.set_title(title)
    return _save(fig, out_dir, name)


def plot_defect_table(report, out_dir, name="egorov_defect.png"):
    fig, ax = plt.subplots(figsize=(6.5, 4))
    for n in report.n_values:
        ax.plot(report.t_samples, report.weighted_norms[n], "o-", label=f"n_modes={n}")
    ax.set_xlabel("t")
    ax.set_ylabel("|| E(t) Lambda(t) ||")
    ax.legend()
    ax.set_title(f"conjugation defect, chi width {report.chi_width}")
    return _save(fig, out_dir, name)


def plot_eta_values(b_values, hurwitz, lattice, out_dir, name="eta.png"):
    fig, ax = plt.subplots(figsize=(6, 4))
    ax.plot(b_values, hurwitz, "o", label="closed form")
    ax.plot(b_values, lattice, "x", label="lattice sums")
    bb = np.linspace(0.01, 0.99, 199)
    ax.plot(bb, 1.0 - 2.0 * bb, lw=0.7, color="gray")
    ax.set_xlabel("offset b")
    ax.set_ylabel("eta")
    ax.legend()
    ax.set_title("spectral asymmetry of {n + b}")
    return _save(fig, out_dir, name)


def plot_index_stability(stability_map, out_dir, name="index_stability.png"):
    fig, ax = plt.subplots(figsize=(5.5, 3.5))
    ns = sorted(stability_map)
    ax.plot(ns, [stability_map[n] for n in ns], "o-")
    ax.set_xlabel("n_modes")
    ax.set_ylabel("index")
    ax.set_title("index across the truncation ladder")
    return _save(fig, out_dir, name)
