"""Static vector-figure emission. No display server: Agg only, SVG files."""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from .analysis.kl import silverman_bandwidth


def _size_groups(L):
    return [int(v) for v in np.unique(L)]


def plot_collapse(q, L, y, sigma, fit, out_path, beta_multiplier=1,
                  xlabel="p", ylabel="observable"):
    """Two panels: raw curves per size, and the rescaled collapse."""
    q = np.asarray(q, dtype=np.float64)
    L = np.asarray(L, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    sigma = np.asarray(sigma, dtype=np.float64)

    params = fit.params
    if fit.ansatz == "static":
        e_x = 1.0 / params["nu"]
        e_y = beta_multiplier * params["beta"] / params["nu"]
        q_c = params["p_c"]
        xlab_scaled = f"({xlabel} - p_c) L^(1/nu)"
    else:
        e_x = -params["z"]
        e_y = beta_multiplier * params["beta"]
        q_c = 0.0
        xlab_scaled = f"{xlabel} / L^z"

    fig, (ax0, ax1) = plt.subplots(1, 2, figsize=(9.0, 3.6))
    for size in _size_groups(L):
        sel = L == size
        order = np.argsort(q[sel])
        qs, ys, ss = q[sel][order], y[sel][order], sigma[sel][order]
        ax0.errorbar(qs, ys, yerr=ss, marker="o", ms=3, lw=1,
                     capsize=2, label=f"L={size}")
        scale = float(size) ** e_y
        xs = (qs - q_c) * float(size) ** e_x
        ax1.errorbar(xs, scale * ys, yerr=scale * ss, marker="o", ms=3,
                     lw=0, elinewidth=1, capsize=2, label=f"L={size}")
    ax0.set_xlabel(xlabel)
    ax0.set_ylabel(ylabel)
    ax0.legend(fontsize=8)
    ax1.set_xlabel(xlab_scaled)
    ax1.set_ylabel(f"L^e {ylabel}")
    label_bits = [f"{k}={v:.4f}" for k, v in params.items() if v is not None]
    ax1.set_title(", ".join(label_bits) + f"  (chi2_nu={fit.chi2_nu:.3g})",
                  fontsize=8)
    fig.tight_layout()
    fig.savefig(out_path)
    plt.close(fig)
    return out_path


def plot_kl_densities(samples_a, samples_b, out_path, label_a="A",
                      label_b="B", atom_tol=1e-12):
    """Overlaid kernel-density curves of two fluctuation sample sets.

    The point masses at zero are drawn as stems at x=0 with height equal to
    their sample weight, separate from the continuous densities.
    """
    fig, ax = plt.subplots(figsize=(5.2, 3.6))
    for samples, label, color in ((samples_a, label_a, "C0"),
                                  (samples_b, label_b, "C1")):
        s = np.asarray(samples, dtype=np.float64).ravel()
        atoms = np.abs(s) <= atom_tol
        cont = s[~atoms]
        w_atom = atoms.mean()
        if len(cont) >= 2:
            h = silverman_bandwidth(cont)
            if h > 0:
                grid = np.linspace(cont.min() - 3 * h, cont.max() + 3 * h,
                                   400)
                dens = np.exp(-(grid[:, None] - cont[None, :]) ** 2
                              / (2 * h * h)).sum(axis=1)
                dens /= len(cont) * h * np.sqrt(2 * np.pi)
                ax.plot(grid, (1 - w_atom) * dens, color=color,
                        label=f"{label} (atom {w_atom:.3f})")
        if w_atom > 0:
            ax.plot([0, 0], [0, w_atom], color=color, lw=3, alpha=0.5)
    ax.set_xlabel("quantum fluctuation")
    ax.set_ylabel("density")
    ax.legend(fontsize=8)
    fig.tight_layout()
    fig.savefig(out_path)
    plt.close(fig)
    return out_path


def plot_ensemble_curves(rows, x_key, y_key, err_key, out_path,
                         xlabel=None, ylabel=None, logy=False):
    """Per-size curves of one EnsembleStats column versus p or t.

    rows: list of dicts (parsed CSV rows) each holding L, the x column, the
    y column, and its standard error.
    """
    fig, ax = plt.subplots(figsize=(5.2, 3.6))
    sizes = sorted({int(r["L"]) for r in rows})
    for size in sizes:
        pts = sorted((float(r[x_key]), float(r[y_key]), float(r[err_key]))
                     for r in rows if int(r["L"]) == size)
        xs = [a for a, _, _ in pts]
        ys = [b for _, b, _ in pts]
        es = [c for _, _, c in pts]
        ax.errorbar(xs, ys, yerr=es, marker="o", ms=3, lw=1, capsize=2,
                    label=f"L={size}")
    if logy:
        ax.set_yscale("log")
    ax.set_xlabel(xlabel or x_key)
    ax.set_ylabel(ylabel or y_key)
    ax.legend(fontsize=8)
    fig.tight_layout()
    fig.savefig(out_path)
    plt.close(fig)
    return out_path
