"""Figure rendering for fidelity curves and scaling tables.

Figures are written next to the delimited output; the Agg backend keeps this
usable on headless machines.
"""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402

from .curves import FidelityCurve

_LABELS = {
    "f_opt": "optimal",
    "f_gauss": "Gaussian",
    "f_upper": "upper bound",
    "f_lower": "lower bound",
}


def plot_curves(curves: list[FidelityCurve], out_path: str | Path,
                title: str | None = None) -> Path:
    """Render one or more fidelity curves into a single PNG."""
    out_path = Path(out_path)
    fig, ax = plt.subplots(figsize=(6.4, 4.2))
    many = len(curves) > 1
    for curve in curves:
        for name, col in curve.columns().items():
            label = _LABELS[name]
            if many:
                label += f" (N={curve.n_sites}, Nd={curve.n_members})"
            ax.plot(curve.times, col, lw=1.2, label=label)
    ax.set_xlabel(r"t [1/J]")
    ax.set_ylabel("recovery fidelity")
    ax.set_ylim(0.64, 1.02)
    ax.axhline(2.0 / 3.0, color="0.7", lw=0.8, ls=":")
    if title:
        ax.set_title(title)
    ax.legend(fontsize=8, frameon=False)
    fig.tight_layout()
    out_path.parent.mkdir(parents=True, exist_ok=True)
    fig.savefig(out_path, dpi=160)
    plt.close(fig)
    return out_path


def plot_scaling(ns, t0s, fit, out_path: str | Path) -> Path:
    """Memory time versus size on a log axis, with the fitted exponential."""
    import numpy as np

    out_path = Path(out_path)
    fig, ax = plt.subplots(figsize=(5.4, 4.0))
    ax.semilogy(ns, t0s, "o", label="measured")
    if fit is not None:
        grid = np.linspace(min(ns), max(ns), 64)
        ax.semilogy(grid, fit.prefactor * np.exp(fit.rate * grid), "-",
                    label=f"fit: rate {fit.rate:.3f}, R^2 {fit.r_squared:.3f}")
    ax.set_xlabel("N")
    ax.set_ylabel(r"memory time t0 [1/J]")
    ax.legend(frameon=False)
    fig.tight_layout()
    out_path.parent.mkdir(parents=True, exist_ok=True)
    fig.savefig(out_path, dpi=160)
    plt.close(fig)
    return out_path
