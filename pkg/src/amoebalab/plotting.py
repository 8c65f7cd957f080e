"""SVG figures for the command-line reports.

Figures are written with a fixed hash salt and no date metadata, so identical
inputs give byte-identical files.
"""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

_RC = {
    "svg.hashsalt": "amoebalab",
    "svg.fonttype": "none",
    "figure.figsize": (5.0, 5.0),
    "font.size": 10.0,
    "axes.grid": False,
}


def _save(fig, path):
    fig.savefig(path, format="svg", metadata={"Date": None, "Creator": None})
    plt.close(fig)


def plot_raster(raster, path, polygon=None, curves=(), title: str = "", labels=("x1", "x2")):
    """Amoeba raster with optional polygon outline and image polylines (``k x 2`` arrays)."""
    with plt.rc_context(_RC):
        fig, ax = plt.subplots()
        x, y = raster.axes()
        d1, d2 = raster.spacing
        extent = (x[0] - d1 / 2, x[-1] + d1 / 2, y[0] - d2 / 2, y[-1] + d2 / 2)
        ax.imshow(raster.cells.T, origin="lower", extent=extent, cmap="Greys", vmin=0, vmax=1.6,
                  interpolation="nearest", aspect="equal")
        for c in curves:
            c = np.asarray(c)
            if len(c) > 1:
                ax.plot(c[:, 0], c[:, 1], color="tab:red", lw=0.6)
        if polygon is not None and len(polygon.vertices):
            v = np.vstack([polygon.vertices, polygon.vertices[:1]])
            ax.plot(v[:, 0], v[:, 1], color="tab:blue", lw=1.2)
        ax.set_xlim(extent[0], extent[1])
        ax.set_ylim(extent[2], extent[3])
        ax.set_xlabel(labels[0])
        ax.set_ylabel(labels[1])
        if title:
            ax.set_title(title)
        _save(fig, path)


def plot_polygon(polygon, path, points=None, assignments=None, title: str = ""):
    """Polygon with vertex labels; ``points`` (``k x 2``) are overlaid as dots."""
    with plt.rc_context(_RC):
        fig, ax = plt.subplots()
        v = np.vstack([polygon.vertices, polygon.vertices[:1]])
        ax.plot(v[:, 0], v[:, 1], "-o", color="tab:blue", ms=4)
        if assignments is not None:
            for (a, b), k in zip(polygon.vertices, assignments):
                ax.annotate(str(k), (a, b), textcoords="offset points", xytext=(4, 4))
        if points is not None and len(points):
            p = np.asarray(points)
            ax.plot(p[:, 0], p[:, 1], ".", color="tab:orange", ms=3)
        ax.set_aspect("equal")
        ax.set_xlabel("g1")
        ax.set_ylabel("g2")
        if title:
            ax.set_title(title)
        _save(fig, path)


def plot_field(xs, ys, values, path, title: str = "", label: str = ""):
    """Heat map of ``values[i, j]`` at ``(xs[i], ys[j])``."""
    with plt.rc_context(_RC):
        fig, ax = plt.subplots()
        m = ax.pcolormesh(xs, ys, np.asarray(values).T, shading="nearest", cmap="viridis")
        fig.colorbar(m, ax=ax, label=label)
        ax.set_aspect("equal")
        if title:
            ax.set_title(title)
        _save(fig, path)
