"""Figures for pipeline reports, rendered off-screen to PNG files.

Every figure is drawn on a fresh :class:`~matplotlib.figure.Figure` with the
Agg canvas, so nothing touches global pyplot state and no display is needed.
"""

from __future__ import annotations

from pathlib import Path

import numpy as np
from matplotlib.backends.backend_agg import FigureCanvasAgg
from matplotlib.figure import Figure

__all__ = ["plot_transfer", "plot_timeseries", "plot_cost"]

_STYLES = ("-", "--", ":", "-.")


def _new(nrows=1, ncols=1, size=(6.4, 4.0)):
    fig = Figure(figsize=size, layout="constrained")
    FigureCanvasAgg(fig)
    axes = fig.subplots(nrows, ncols, squeeze=False)
    return fig, axes


def _save(fig, path) -> Path:
    path = Path(path)
    # no Software/date metadata so reruns produce the same bytes
    fig.savefig(path, dpi=120, metadata={"Software": None})
    return path


def plot_transfer(path, omegas, curves: dict, points: dict | None = None, title: str | None = None) -> Path:
    """Magnitude ``|H(i omega)|`` of several curves plus scattered estimates.

    Parameters
    ----------
    omegas : array_like
        Frequency grid shared by all curves.
    curves : dict
        ``label -> complex values on omegas``; ``nan`` entries are skipped.
    points : dict, optional
        ``label -> (omegas, complex values)`` drawn as markers.
    """
    fig, ax = _new()
    ax = ax[0, 0]
    w = np.asarray(omegas, dtype=float)
    for i, (label, vals) in enumerate(curves.items()):
        ax.loglog(w, np.abs(np.asarray(vals)), _STYLES[i % len(_STYLES)], label=label)
    for (label, (pw, pv)), marker in zip((points or {}).items(), "sDo^v"):
        ax.loglog(np.asarray(pw), np.abs(np.asarray(pv)), marker, ls="none", mfc="none", label=label)
    ax.set_xlabel(r"$\omega$ [rad/s]")
    ax.set_ylabel(r"$|H(i\omega)|$")
    if title:
        ax.set_title(title)
    ax.grid(True, which="both", alpha=0.3)
    ax.legend(fontsize="small")
    return _save(fig, path)


def plot_timeseries(path, t, outputs: dict, title: str | None = None) -> Path:
    """Overlay of output trajectories (top) and their deviation from the first one (bottom)."""
    fig, axes = _new(2, 1, size=(6.4, 5.6))
    top, bottom = axes[0, 0], axes[1, 0]
    t = np.asarray(t)
    labels = list(outputs)
    ref = np.asarray(outputs[labels[0]])
    for i, label in enumerate(labels):
        top.plot(t, outputs[label], _STYLES[i % len(_STYLES)], label=label)
        if i:
            bottom.semilogy(t, np.abs(np.asarray(outputs[label]) - ref), _STYLES[i % len(_STYLES)], label=label)
    top.set_ylabel("y(t)")
    top.legend(fontsize="small")
    bottom.set_xlabel("t")
    bottom.set_ylabel(f"|y - y[{labels[0]}]|")
    if title:
        top.set_title(title)
    for ax in (top, bottom):
        ax.grid(True, alpha=0.3)
    return _save(fig, path)


def plot_cost(path, p, costs, p_star: float | None = None) -> Path:
    """Cost sweep over a scalar parameter; failed points are left out."""
    fig, ax = _new()
    ax = ax[0, 0]
    p = np.asarray(p, dtype=float)
    c = np.asarray(costs, dtype=float)
    ok = np.isfinite(c)
    ax.semilogy(p[ok], c[ok], ".-")
    if p_star is not None:
        ax.axvline(p_star, color="k", ls=":", lw=1, label=f"minimizer {p_star:.6g}")
        ax.legend(fontsize="small")
    ax.set_xlabel("parameter")
    ax.set_ylabel("least-squares mismatch")
    ax.grid(True, which="both", alpha=0.3)
    return _save(fig, path)
