"""Optional SVG rendering of curves and matrices (needs matplotlib).

Output is deterministic: no timestamp metadata and a fixed id salt.
"""

from __future__ import annotations

from pathlib import Path
from typing import Mapping, Sequence

import numpy as np


def _pyplot():
    try:
        import matplotlib
    except ImportError as exc:  # pragma: no cover - depends on the install
        raise RuntimeError("SVG output needs matplotlib (pip install 'spreadresponse[svg]')") from exc
    matplotlib.use("Agg")
    matplotlib.rcParams["svg.hashsalt"] = "spreadresponse"
    matplotlib.rcParams["svg.fonttype"] = "none"
    import matplotlib.pyplot as plt

    return plt


def _save(fig, path: str | Path) -> None:
    fig.savefig(path, format="svg", metadata={"Date": None, "Creator": None})


def curves_svg(curves: Mapping[str, object], path: str | Path, title: str = "", xlabel: str = "tau") -> None:
    """Line plot of label -> ResponseCurve on a log lag axis."""
    plt = _pyplot()
    fig, ax = plt.subplots(figsize=(6, 4))
    for label, c in curves.items():
        ok = ~np.isnan(c.values)
        ax.plot(c.lags[ok], c.values[ok], label=label, lw=1)
    ax.set_xscale("log")
    ax.axhline(0.0, color="grey", lw=0.5)
    ax.set_xlabel(xlabel)
    ax.set_ylabel("R(tau)")
    if title:
        ax.set_title(title)
    if curves:
        ax.legend(fontsize="small")
    fig.tight_layout()
    _save(fig, path)
    plt.close(fig)


def matrices_svg(matrices: Sequence, path: str | Path, title: str = "") -> None:
    """One heatmap panel of the normalized matrix per tau."""
    plt = _pyplot()
    n = max(len(matrices), 1)
    fig, axes = plt.subplots(1, n, figsize=(3 * n, 3), squeeze=False)
    for ax, m in zip(axes[0], matrices):
        ax.imshow(np.nan_to_num(m.normalized), cmap="RdBu_r", vmin=-1, vmax=1)
        ax.set_title(f"tau = {m.tau} s", fontsize="small")
        ax.set_xticks([])
        ax.set_yticks([])
    if title:
        fig.suptitle(title)
    fig.tight_layout()
    _save(fig, path)
    plt.close(fig)


def scatter_svg(x: Sequence[float], ys: Mapping[str, Sequence[float]], path: str | Path,
                xlabel: str = "", logx: bool = False) -> None:
    plt = _pyplot()
    fig, ax = plt.subplots(figsize=(5, 4))
    for label, y in ys.items():
        ax.scatter(x, y, s=6, label=label)
    if logx:
        ax.set_xscale("log")
    ax.set_xlabel(xlabel)
    ax.legend(fontsize="small")
    fig.tight_layout()
    _save(fig, path)
    plt.close(fig)
