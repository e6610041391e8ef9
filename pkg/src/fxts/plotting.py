"""Figures rendered next to the CSV artifacts.

Everything is drawn with the Agg backend into explicit Figure objects so
rendering does not depend on a display or on pyplot global state.
"""

import numpy as np
from matplotlib.figure import Figure

STYLE = {
    "font.size": 9,
    "axes.labelsize": 9,
    "axes.titlesize": 10,
    "legend.fontsize": 8,
    "lines.linewidth": 1.2,
    "axes.grid": True,
    "grid.alpha": 0.3,
}

WIDTH = 6.0
GOLDEN = (np.sqrt(5.0) - 1.0) / 2.0


def _figure(nrows=1):
    import matplotlib

    matplotlib.rcParams.update(STYLE)
    return Figure(figsize=(WIDTH, WIDTH * GOLDEN * (0.8 if nrows == 1 else 1.2)))


def _save(fig, path):
    # no Software stamp: keeps the bytes stable across runs
    fig.savefig(path, format="png", dpi=120, metadata={"Software": None})


def trajectory_figure(traj, path, title=""):
    fig = _figure(2)
    ax1, ax2 = fig.subplots(2, 1, sharex=True)
    norms = np.linalg.norm(traj.states, axis=1)
    pos = norms > 0
    ax1.semilogy(traj.times[pos], norms[pos], label="|x|")
    ax1.axhline(traj.eps, color="0.5", ls=":", label="eps")
    if traj.t_settle is not None:
        ax1.axvline(traj.t_settle, color="C3", ls="--", label="settled")
    ax1.set_ylabel("|x(t)|")
    ax1.legend(loc="best")
    if traj.v_values is not None:
        V = traj.v_values
        ax2.semilogy(traj.times[V > 0], V[V > 0], color="C1")
        ax2.set_ylabel("V(x(t))")
    ax2.set_xlabel("t")
    if title:
        ax1.set_title(title)
    fig.tight_layout()
    _save(fig, path)


def profile_figure(profiles, path, title=""):
    """``profiles`` maps a label to a SettlingProfile."""
    fig = _figure()
    ax = fig.subplots()
    for i, (label, prof) in enumerate(profiles.items()):
        r = np.asarray(prof.radii)
        T = np.nanmax(prof.times, axis=1) if prof.times.size else np.array([])
        ok = np.isfinite(T)
        ax.semilogx(r[ok], T[ok], "o-", color=f"C{i}", label=label)
        b = prof.bound_reference
        if b is not None and np.isfinite(b.value):
            ax.axhline(b.value, color=f"C{i}", ls="--", lw=0.8, label=f"{label} bound")
    ax.set_xlabel("|x(0)|")
    ax.set_ylabel("settling time")
    ax.legend(loc="best")
    if title:
        ax.set_title(title)
    fig.tight_layout()
    _save(fig, path)
