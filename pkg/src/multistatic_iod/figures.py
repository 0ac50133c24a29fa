"""Figure rendering for the experiment reports.

Every report subcommand writes its delimited output first and then, by
default, a small set of PNG figures next to it. Rendering is headless
(Agg backend) and purely a presentation layer: nothing here feeds back
into the numbers.
"""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

_SERIES_STYLE = {
    ("wls", "final"): dict(color="tab:blue", marker="o", label="two-stage WLS"),
    ("wls", "stage1"): dict(color="tab:cyan", marker="s", linestyle="--",
                            label="WLS stage 1 only"),
    ("tri", "final"): dict(color="tab:orange", marker="^", label="trilateration"),
}


def render_rmse_figures(rows, out_prefix: str) -> list:
    """Log-log RMSE vs timing noise, one figure for position and one
    for velocity; the CRLB curve rides along. Returns written paths."""
    paths = []
    for attr, crlb_attr, unit, name in (
            ("pos_rmse_m", "crlb_pos_m", "m", "rmse_position"),
            ("vel_rmse_mps", "crlb_vel_mps", "m/s", "rmse_velocity")):
        fig, ax = plt.subplots(figsize=(7, 5))
        series = {}
        bound = {}
        for row in rows:
            series.setdefault((row.estimator, row.stage), []).append(
                (row.sigma_t_s, getattr(row, attr)))
            bound[row.sigma_t_s] = getattr(row, crlb_attr)
        for key, points in series.items():
            points.sort()
            sig = [p[0] for p in points]
            val = [p[1] for p in points]
            style = _SERIES_STYLE.get(key, dict(label=f"{key[0]} {key[1]}"))
            ax.loglog(sig, val, **style)
        levels = sorted(bound)
        ax.loglog(levels, [bound[s] for s in levels],
                  color="black", linestyle=":", label="CRLB")
        ax.set_xlabel("timing noise sigma_t [s]")
        ax.set_ylabel(f"RMSE [{unit}]")
        ax.grid(True, which="both", alpha=0.3)
        ax.legend()
        fig.tight_layout()
        path = f"{out_prefix}{name}.png"
        fig.savefig(path, dpi=120)
        plt.close(fig)
        paths.append(path)
    return paths


def render_axis_histograms(axes, title: str, path: str) -> str:
    """Six-panel histogram grid, one panel per state axis."""
    fig, grid = plt.subplots(2, 3, figsize=(12, 7))
    for summary, ax in zip(axes, grid.ravel()):
        centers = 0.5 * (summary.hist_edges[:-1] + summary.hist_edges[1:])
        width = summary.hist_edges[1] - summary.hist_edges[0]
        ax.bar(centers, summary.hist_counts, width=width,
               color="tab:blue", edgecolor="none")
        ax.axvline(summary.mean, color="tab:red", linewidth=1.0,
                   label=f"mean {summary.mean:.2e}")
        ax.set_title(summary.axis)
        ax.legend(fontsize=8)
    fig.suptitle(title)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return path


def render_ellipsoids(ellipsoids: dict, path: str) -> str:
    """3-D wireframe of each confidence ellipsoid around its center.

    All ellipsoids render in one shared frame centered on the mean of
    the centers so the volume contrast is visible at a glance.
    """
    fig = plt.figure(figsize=(8, 7))
    ax = fig.add_subplot(projection="3d")
    theta = np.linspace(0.0, np.pi, 30)
    phi = np.linspace(0.0, 2.0 * np.pi, 30)
    theta, phi = np.meshgrid(theta, phi)
    unit = np.stack([np.sin(theta) * np.cos(phi),
                     np.sin(theta) * np.sin(phi),
                     np.cos(theta)])
    origin = np.mean([spec.center_m for spec in ellipsoids.values()], axis=0)
    colors = ("tab:blue", "tab:orange", "tab:green", "tab:red")
    radius = 0.0
    for (name, spec), color in zip(sorted(ellipsoids.items()), colors):
        scaled = unit * spec.semi_axes_m[:, None, None]
        shaped = np.einsum("ij,jkl->ikl", spec.rotation, scaled)
        offset = spec.center_m - origin
        ax.plot_wireframe(shaped[0] + offset[0], shaped[1] + offset[1],
                          shaped[2] + offset[2],
                          color=color, alpha=0.4, linewidth=0.5)
        ax.plot([], [], color=color, label=name)
        radius = max(radius, float(spec.semi_axes_m[0] + np.linalg.norm(offset)))
    if radius == 0.0:
        radius = 1.0
    for setter in (ax.set_xlim, ax.set_ylim, ax.set_zlim):
        setter(-radius, radius)
    ax.set_xlabel("x [m]")
    ax.set_ylabel("y [m]")
    ax.set_zlabel("z [m]")
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return path
