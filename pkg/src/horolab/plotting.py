"""Figures: Poincare-disk pictures of horocycle orbits and scan/sweep plots.

All output is static and byte-reproducible: the SVG backend gets a fixed
hash salt and no date metadata.
"""

from __future__ import annotations

import cmath
import math

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

from . import psl2  # noqa: E402
from .fuchsian import FuchsianGroup  # noqa: E402

_RC = {
    "svg.hashsalt": "horolab",
    "svg.fonttype": "none",
    "font.size": 9,
    "axes.linewidth": 0.6,
}
_META = {
    "svg": {"Date": None, "Creator": None},
    "png": {"Software": None},
    "pdf": {"CreationDate": None, "Producer": None, "Creator": None},
}


def to_disk(x: float, y: float) -> complex:
    """Cayley map z -> (z - i)/(z + i) from the upper half plane to the unit disk."""
    z = complex(x, y)
    return (z - 1j) / (z + 1j)


def orbit_trace(g: psl2.GroupElement, T: float, samples: int) -> np.ndarray:
    """Disk coordinates of g b_t . i for ``samples`` values of t in [-T, T]."""
    if samples <= 0:
        return np.empty(0, dtype=complex)
    out = []
    for t in np.linspace(-T, T, samples):
        x, y = psl2.mobius_xy(g, float(t), 1.0)
        out.append(to_disk(x, y))
    return np.array(out)


def octagon_vertices(group: FuchsianGroup) -> np.ndarray:
    """Vertices of the Dirichlet domain at i, in the disk.

    Side midpoints point towards the neighbouring centres g_k . i; vertices
    sit half way between consecutive midpoint directions at the circumradius.
    """
    if group.domain_radius is None:
        return np.empty(0, dtype=complex)
    angles = []
    for g in group.generators:
        z = psl2.base_point(g)
        angles.append(cmath.phase(to_disk(z.x, z.y)))
    angles.sort()
    rho = math.tanh(group.domain_radius / 2.0)
    verts = []
    for k, th in enumerate(angles):
        nxt = angles[(k + 1) % len(angles)] + (2 * math.pi if k + 1 == len(angles) else 0.0)
        mid = 0.5 * (th + nxt)
        verts.append(rho * cmath.exp(1j * mid))
    return np.array(verts)


def _save(fig, path) -> None:
    fmt = str(path).rsplit(".", 1)[-1].lower()
    fig.savefig(path, format=fmt, metadata=_META.get(fmt))
    plt.close(fig)


def render_disk(path, traces: dict[str, np.ndarray], vertices: np.ndarray | None = None) -> None:
    with plt.rc_context(_RC):
        fig, ax = plt.subplots(figsize=(4.5, 4.5))
        th = np.linspace(0, 2 * np.pi, 721)
        ax.plot(np.cos(th), np.sin(th), color="0.3", lw=0.8)
        if vertices is not None and len(vertices):
            v = np.append(vertices, vertices[:1])
            ax.plot(v.real, v.imag, "o-", color="0.55", ms=2.5, lw=0.6, label="octagon vertices")
        for name, w in traces.items():
            if len(w):
                ax.plot(w.real, w.imag, lw=1.0, label=name)
        ax.set_aspect("equal")
        ax.set_xlim(-1.05, 1.05)
        ax.set_ylim(-1.05, 1.05)
        ax.set_axis_off()
        if traces or (vertices is not None and len(vertices)):
            ax.legend(loc="lower left", frameon=False, fontsize=7)
        _save(fig, path)


def render_scan(path, rows, delta: float | None = None, title: str = "") -> None:
    """Plot lo and hi of the distance bracket against t."""
    t = np.array([r[0] for r in rows], dtype=float)
    lo = np.array([r[1] for r in rows], dtype=float)
    hi = np.array([r[2] for r in rows], dtype=float)
    with plt.rc_context(_RC):
        fig, ax = plt.subplots(figsize=(5.0, 3.2))
        ax.plot(t, hi, lw=1.0, label="hi")
        ax.plot(t, lo, lw=1.0, ls="--", label="lo")
        if delta is not None:
            ax.axhline(delta, color="0.4", lw=0.6, ls=":", label="delta")
        ax.set_xlabel("t")
        ax.set_ylabel("d_X bracket")
        if title:
            ax.set_title(title)
        ax.legend(frameon=False)
        fig.tight_layout()
        _save(fig, path)


def render_sweep(path, rows) -> None:
    d = [r["delta"] for r in rows]
    f = [r["fraction"] for r in rows]
    with plt.rc_context(_RC):
        fig, ax = plt.subplots(figsize=(4.5, 3.0))
        ax.plot(d, f, "o-", lw=1.0, ms=3)
        ax.set_xlabel("delta")
        ax.set_ylabel("fraction separated")
        ax.set_ylim(-0.05, 1.05)
        fig.tight_layout()
        _save(fig, path)
