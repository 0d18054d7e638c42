"""Matplotlib renderers for the CLI report path.

Figures are decorative companions to the delimited outputs: a meridian
contour of an eigenfunction (piecewise-linear iso-lines on the
triangulation) and simple line plots for parameter sweeps.  Nothing in the
acceptance path depends on them.
"""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402
import matplotlib.tri as mtri  # noqa: E402

from .eigensolver import EigenSolution  # noqa: E402

__all__ = ["meridian_contour", "sweep_plot"]


def meridian_contour(sol: EigenSolution, index: int, path: str, levels: int = 10) -> str:
    """Render iso-lines of a nodal field on the meridian triangulation."""
    mesh = sol.problem.mesh
    tri = mtri.Triangulation(mesh.nodes[:, 0], mesh.nodes[:, 1], mesh.triangles)
    fig, ax = plt.subplots(figsize=(5.0, 4.0))
    cs = ax.tricontour(tri, sol.fields[index], levels=levels, linewidths=0.9)
    ax.clabel(cs, inline=True, fontsize=6, fmt="%.3g")
    ax.plot(mesh.nodes[mesh.boundary_edges[:, 0], 0],
            mesh.nodes[mesh.boundary_edges[:, 0], 1],
            color="black", linewidth=0.8)
    ax.set_xlabel("r")
    ax.set_ylabel("y")
    ax.set_title(f"mode m={sol.problem.m}, k={index + 1}, nu={sol.eigenvalues[index]:.6g}")
    ax.set_aspect("equal")
    fig.tight_layout()
    fig.savefig(path)
    plt.close(fig)
    return path


def sweep_plot(x_label: str, x_values, series: dict, path: str, logy: bool = False) -> str:
    """Line plot of one or more sweep columns against the sweep axis."""
    fig, ax = plt.subplots(figsize=(5.0, 3.5))
    for name, values in series.items():
        ax.plot(x_values, values, marker="o", markersize=3, label=name)
    ax.set_xlabel(x_label)
    if logy:
        ax.set_yscale("log")
    ax.grid(True, alpha=0.3)
    ax.legend(fontsize=8)
    fig.tight_layout()
    fig.savefig(path)
    plt.close(fig)
    return path
