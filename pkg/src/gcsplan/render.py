"""Deterministic SVG rendering of 2D scenarios: sets, edges, cost-to-go
contour lines, and trajectory overlays."""

from __future__ import annotations

import numpy as np

from .graph import GcsGraph, Trajectory
from .synthesis import LowerBoundCertificate

GRID = 120
SET_COLOR = "#7fcdcd"
EDGE_COLOR = "#bbbbbb"
TRAJ_COLORS = ("#d62728", "#1f77b4", "#2ca02c", "#9467bd", "#ff7f0e")


def render_svg(graph: GcsGraph, out_path: str,
               cert: LowerBoundCertificate | None = None,
               trajectories=(), contour_levels: int = 12,
               x_t=None) -> str:
    """Render the scenario to an SVG file; byte-identical output for identical
    inputs. Only 2D vertex sets are drawable."""
    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt
    from matplotlib import patches

    for v, vert in graph.vertices.items():
        if vert.dimension != 2:
            raise ValueError(f"vertex {v!r} is {vert.dimension}-dimensional; "
                             "only 2D scenarios can be rendered")

    with plt.rc_context({"svg.hashsalt": "gcsplan"}):
        fig, ax = plt.subplots(figsize=(7, 7))
        centers = {}
        for v in sorted(graph.vertices):
            vert = graph.vertices[v]
            lo, hi = vert.set.bounding_box()
            centers[v] = 0.5 * (lo + hi)
            _draw_set(ax, patches, vert.set, lo, hi)
            ax.annotate(v, centers[v], fontsize=7, ha="center", va="bottom",
                        color="#333333")

        for e in sorted(graph.edges, key=lambda e: e.key):
            p, q = centers[e.tail], centers[e.head]
            ax.annotate("", xy=q, xytext=p,
                        arrowprops={"arrowstyle": "->", "color": EDGE_COLOR,
                                    "linewidth": 0.7})

        if cert is not None:
            _draw_contours(ax, plt, graph, cert, contour_levels, x_t)

        for i, traj in enumerate(trajectories):
            pts = np.asarray([np.asarray(p, dtype=float) for p in traj.points])
            color = TRAJ_COLORS[i % len(TRAJ_COLORS)]
            ax.plot(pts[:, 0], pts[:, 1], "-o", color=color, markersize=3,
                    linewidth=1.5, label="/".join(traj.path))
        if trajectories:
            ax.legend(fontsize=7, loc="best")

        ax.set_aspect("equal")
        ax.autoscale()
        fig.savefig(out_path, format="svg", metadata={"Date": None})
        plt.close(fig)
    return out_path


def _draw_set(ax, patches, cset, lo, hi):
    width = hi - lo
    if np.all(width <= 1e-9):
        ax.plot([lo[0]], [lo[1]], "o", color=SET_COLOR, markersize=6,
                markeredgecolor="#2a7a7a")
    elif cset.affine_eqs and np.any(width <= 1e-9) or _is_segment(cset):
        # 1D piece: draw the segment between its bounding-box extremes
        p0, p1 = _segment_endpoints(cset, lo, hi)
        ax.plot([p0[0], p1[0]], [p0[1], p1[1]], "-", color=SET_COLOR,
                linewidth=4, solid_capstyle="round", alpha=0.9)
    else:
        rect = patches.Rectangle(lo, width[0], width[1], facecolor=SET_COLOR,
                                 edgecolor="#2a7a7a", alpha=0.45, linewidth=0.8)
        ax.add_patch(rect)


def _is_segment(cset) -> bool:
    return len(cset.affine_eqs) == 1


def _segment_endpoints(cset, lo, hi):
    # endpoints of a 1D set inside its bounding box: walk the box corners
    # and keep the two feasible extremes
    corners = [np.array([lo[0], lo[1]]), np.array([lo[0], hi[1]]),
               np.array([hi[0], lo[1]]), np.array([hi[0], hi[1]])]
    feas = [c for c in corners if cset.contains(c, tol=1e-6)]
    if len(feas) >= 2:
        return feas[0], feas[-1]
    return np.asarray(lo), np.asarray(hi)


def _draw_contours(ax, plt, graph, cert, levels, x_t):
    values = []
    grids = []
    for v in sorted(cert.bounds):
        vert = graph.vertices[v]
        lo, hi = vert.set.bounding_box()
        if np.all(hi - lo <= 1e-9):
            continue
        xs = np.linspace(lo[0], hi[0], GRID)
        ys = np.linspace(lo[1], hi[1], GRID)
        X, Y = np.meshgrid(xs, ys)
        Z = np.full(X.shape, np.nan)
        for i in range(GRID):
            for j in range(GRID):
                p = np.array([X[i, j], Y[i, j]])
                if vert.set.contains(p, tol=1e-6):
                    Z[i, j] = cert.evaluate(v, p, x_t=x_t)
        if np.any(np.isfinite(Z)):
            grids.append((X, Y, Z))
            values.append(Z[np.isfinite(Z)])
    if not grids:
        return
    allv = np.concatenate(values)
    lines = np.linspace(allv.min(), allv.max(), levels)
    if lines[0] == lines[-1]:
        return
    for X, Y, Z in grids:
        ax.contour(X, Y, Z, levels=lines, cmap="viridis", linewidths=0.8)
