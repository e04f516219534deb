"""Matplotlib figures for reports: barcodes, persistence diagrams, DCT
projections and zigzag barcodes.

Figures are written with the Agg backend and without the software/date PNG
metadata so reruns produce identical files.
"""

from __future__ import annotations

import math

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

DIM_COLORS = ("tab:blue", "tab:red", "tab:green", "tab:purple")
_PNG_META = {"Software": None}


def _save(fig, path, dpi=120):
    fig.savefig(path, dpi=dpi, metadata=_PNG_META)
    plt.close(fig)


def _finite_cap(barcode, r_max=None):
    if r_max is not None and math.isfinite(r_max):
        return r_max
    if math.isfinite(barcode.r_max):
        return barcode.r_max
    ends = [iv.death for iv in barcode.intervals if math.isfinite(iv.death)]
    ends += [iv.birth for iv in barcode.intervals]
    return 1.1 * max(ends, default=1.0) or 1.0


def barcode_figure(barcode, path, r_max=None, max_dim=None, title=None):
    """One panel per dimension; infinite bars are drawn up to the cap with an arrow."""
    cap = _finite_cap(barcode, r_max)
    top = max((iv.dim for iv in barcode.intervals), default=0) if max_dim is None else max_dim
    fig, axes = plt.subplots(top + 1, 1, figsize=(5, 1.2 + 1.3 * (top + 1)), sharex=True, squeeze=False)
    for k, ax in enumerate(axes[:, 0]):
        ivs = sorted(barcode.of_dim(k), key=lambda iv: (iv.birth, -iv.length))
        for y, iv in enumerate(ivs):
            end = min(iv.death, cap)
            ax.plot([iv.birth, end], [y, y], color=DIM_COLORS[k % 4], lw=1.5)
            if not math.isfinite(iv.death):
                ax.plot(end, y, ">", color=DIM_COLORS[k % 4], ms=3)
        ax.set_ylabel(f"H{k}")
        ax.set_yticks([])
        ax.set_xlim(0, cap)
    axes[-1, 0].set_xlabel("scale r")
    if title:
        axes[0, 0].set_title(title)
    fig.tight_layout()
    _save(fig, path)


def diagram_figure(barcode, path, r_max=None, title=None):
    """Birth/death scatter with infinite deaths plotted on the top edge."""
    cap = _finite_cap(barcode, r_max)
    fig, ax = plt.subplots(figsize=(4, 4))
    ax.plot([0, cap], [0, cap], color="0.6", lw=0.8)
    for k in sorted({iv.dim for iv in barcode.intervals}):
        ivs = barcode.of_dim(k)
        b = np.array([iv.birth for iv in ivs])
        d = np.array([min(iv.death, cap) for iv in ivs])
        ax.scatter(b, d, s=10, color=DIM_COLORS[k % 4], label=f"H{k}")
    ax.set_xlim(0, cap)
    ax.set_ylim(0, cap * 1.02)
    ax.set_xlabel("birth")
    ax.set_ylabel("death")
    ax.legend(loc="lower right", frameon=False)
    if title:
        ax.set_title(title)
    fig.tight_layout()
    _save(fig, path)


def projection_figure(coefficients, path, pairs=((0, 1), (8, 9)), labels=None, title=None):
    """Scatter of DCT coordinates, one panel per pair of basis indices.

    Coefficient columns are ``e1u..e8u, e1v..e8v``; the default pairs show
    the (e1u, e2u) and (e1v, e2v) planes.
    """
    c = np.atleast_2d(coefficients)
    names = labels or [f"e{i + 1}u" for i in range(8)] + [f"e{i + 1}v" for i in range(8)]
    fig, axes = plt.subplots(1, len(pairs), figsize=(3.6 * len(pairs), 3.6), squeeze=False)
    for ax, (i, j) in zip(axes[0], pairs):
        ax.scatter(c[:, i], c[:, j], s=2, color="k", alpha=0.5, linewidths=0)
        ax.set_xlabel(names[i])
        ax.set_ylabel(names[j])
        ax.set_aspect("equal", adjustable="datalim")
    if title:
        fig.suptitle(title)
    fig.tight_layout()
    _save(fig, path)


def zigzag_figure(zbarcode, path, labels=None, title=None):
    """Intervals over node positions, nodes on the horizontal axis."""
    n = zbarcode.n_nodes
    rows = [(a, b) for a, b, mu in sorted(zbarcode.intervals) for _ in range(mu)]
    fig, ax = plt.subplots(figsize=(7, 1.2 + 0.25 * max(len(rows), 1)))
    for y, (a, b) in enumerate(rows):
        ax.plot([a - 0.4, b + 0.4], [y, y], color="tab:red" if b - a + 1 == n else "0.4", lw=3)
    ax.set_xlim(-0.8, n - 0.2)
    ax.set_ylim(-1, max(len(rows), 1))
    ax.set_yticks([])
    ax.set_xticks(range(n))
    if labels is not None:
        ax.set_xticklabels(labels, rotation=90, fontsize=6)
    ax.set_xlabel("node")
    if title:
        ax.set_title(title)
    fig.tight_layout()
    _save(fig, path)
