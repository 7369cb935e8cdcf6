"""Figures for CLI reports (rendered off-screen to PNG files)."""

from __future__ import annotations

import math
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402
from matplotlib.tri import Triangulation  # noqa: E402

from .geometry import Scatterer  # noqa: E402

STYLE = {
    "figure.figsize": (5.0, 4.0),
    "figure.dpi": 110,
    "font.size": 9,
    "axes.grid": True,
    "grid.alpha": 0.3,
    "savefig.bbox": "tight",
}


def _save(fig, path) -> Path:
    path = Path(path)
    fig.savefig(path, metadata={"Software": None})
    plt.close(fig)
    return path


def _draw_scatterer(ax, k: Scatterer, **kw) -> None:
    for c in k.loops:
        v = np.vstack([c.vertices, c.vertices[:1]])
        ax.plot(v[:, 0], v[:, 1], **kw)
    for c in k.screens:
        ax.plot(c.vertices[:, 0], c.vertices[:, 1], **kw)


def plot_geometry(k: Scatterer, path, thickened: Scatterer | None = None, title: str = "") -> Path:
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots()
        _draw_scatterer(ax, k, color="k", lw=1.2)
        if thickened is not None:
            _draw_scatterer(ax, thickened, color="tab:red", lw=0.8)
        ax.set_aspect("equal")
        ax.set_title(title)
        return _save(fig, path)


def plot_field(u, path, part: str = "abs", title: str = "") -> Path:
    """Pseudocolour plot of a P1 field (``part`` is ``abs``, ``real`` or ``imag``)."""
    vals = {"abs": np.abs, "real": np.real, "imag": np.imag}[part](u.values)
    mesh = u.mesh
    tri = Triangulation(mesh.vertices[:, 0], mesh.vertices[:, 1], mesh.triangles)
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots()
        pc = ax.tripcolor(tri, vals, shading="gouraud", cmap="viridis")
        fig.colorbar(pc, ax=ax, shrink=0.8)
        ax.set_aspect("equal")
        ax.grid(False)
        ax.set_title(title or f"{part} of field")
        return _save(fig, path)


def plot_farfield(f, path, title: str = "") -> Path:
    th = np.append(f.angles, 2 * math.pi)
    a = np.abs(np.append(f.samples, f.samples[:1]))
    with plt.rc_context(STYLE):
        fig = plt.figure()
        ax = fig.add_subplot(projection="polar")
        ax.plot(th, a, color="tab:blue")
        ax.set_title(title or "|far-field pattern|")
        return _save(fig, path)


def plot_mosco(report, path) -> Path:
    n = [s.index for s in report.per_step]
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots()
        for key, label in (("value_distance", "values"), ("gradient_distance", "gradients")):
            r = [np.nan if v is None else v for v in report.relative(key)]
            ax.semilogy(n, r, "o-", label=label)
        if report.realization_floor is not None:
            for v, ls, lab in zip(report.realization_floor, (":", "--"), ("value floor", "gradient floor")):
                ax.axhline(v / report.reference_norm, color="0.5", ls=ls, lw=0.8, label=lab)
        ax.set_xlabel("n")
        ax.set_ylabel("relative L2 distance")
        ax.legend()
        return _save(fig, path)


def plot_screen(report, path) -> Path:
    d = [np.nan if v is None else v for v in report.cauchy_deltas]
    h = list(report.thicknesses[:-1])
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots()
        ax.loglog(h, d, "o-")
        ax.invert_xaxis()
        ax.set_xlabel("thickness h_k")
        ax.set_ylabel("far-field Cauchy difference")
        return _save(fig, path)


def plot_sweep(report, path) -> Path:
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots()
        k = np.array([c["k"] for c in report.per_case])
        v = np.array([c["l2_norm_total_field"] for c in report.per_case])
        ax.plot(k, v, ".", alpha=0.5)
        if report.E_hat is not None:
            ax.axhline(report.E_hat, color="tab:red", lw=0.8)
        ax.set_xlabel("k")
        ax.set_ylabel("total-field L2 norm")
        return _save(fig, path)


def plot_decay(radii, profile, path) -> Path:
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots()
        ax.plot(radii, profile, "o-", ms=3)
        ax.set_xlabel("r")
        ax.set_ylabel("max sqrt(r) |u_s|")
        return _save(fig, path)
