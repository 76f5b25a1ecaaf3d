"""Figures written next to the CSV outputs.  Files only, no interactive display."""

from __future__ import annotations

import io

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

STYLE = {
    "figure.figsize": (6.4, 4.0),
    "figure.dpi": 100,
    "axes.grid": True,
    "grid.alpha": 0.3,
    "axes.spines.top": False,
    "axes.spines.right": False,
    "font.size": 10,
    "legend.fontsize": 9,
    "legend.frameon": False,
}


def _render(fig, fmt: str) -> bytes:
    buf = io.BytesIO()
    # fixed metadata keeps reruns byte-identical
    fig.savefig(buf, format=fmt, bbox_inches="tight", metadata={"Software": None} if fmt == "png" else None)
    plt.close(fig)
    return buf.getvalue()


def efrd_figure(tables: dict, m_max: int | None = None, title: str = "", fmt: str = "png") -> bytes:
    """Pr(0^m|1) against m for each labelled table, log-scaled probability axis."""
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots()
        markers = iter("os^dv<>")
        for label, table in tables.items():
            top = table.m_max if m_max is None else min(m_max, table.m_max)
            m = np.arange(top + 1)
            v = table.values[: top + 1]
            keep = v > 0
            ax.semilogy(m[keep], v[keep], marker=next(markers, "."), markersize=3,
                        linewidth=1.0, label=label)
        ax.set_xlabel("m (error-free symbols after an error)")
        ax.set_ylabel(r"$\Pr(0^m \mid 1)$")
        if title:
            ax.set_title(title)
        ax.legend()
        return _render(fig, fmt)


def trace_figure(trace, title: str = "", fmt: str = "png") -> bytes:
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots()
        ax.plot(np.arange(len(trace)), trace, linewidth=1.2)
        ax.set_xlabel("iteration")
        ax.set_ylabel("log-likelihood")
        if title:
            ax.set_title(title)
        return _render(fig, fmt)


def summary_figure(rows, fmt: str = "png") -> bytes:
    """Measured vs regenerated error probability per cell."""
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots()
        cells = [r["cell"] for r in rows]
        x = np.arange(len(cells))
        ax.bar(x - 0.2, [r["pe_measured"] for r in rows], width=0.4, label=r"$P_e$ (measured)")
        ax.bar(x + 0.2, [r["pe_model"] for r in rows], width=0.4, label=r"$\bar{P}_e$ (model)")
        ax.set_xticks(x)
        ax.set_xticklabels([c.replace("_", "\n") for c in cells])
        ax.set_ylabel("error probability")
        ax.legend()
        return _render(fig, fmt)
