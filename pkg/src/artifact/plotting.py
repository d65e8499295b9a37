"""SVG figure output for run artifacts.

Rendering is headless (Agg) and deterministic: the SVG hash salt is pinned
and the date stamp suppressed, so repeated runs produce identical figures.
The resolved config echo travels in the SVG metadata description.
"""

from __future__ import annotations

import numpy as np


def save_energy_plot(
    path,
    times: np.ndarray,
    mean_energy: np.ndarray,
    stderr: np.ndarray | None = None,
    per_realization: list[np.ndarray] | None = None,
    echo: dict[str, object] | None = None,
    title: str = "Weighted-ensemble energy",
) -> None:
    """Plot mean energy vs time with a standard-error band.

    ``per_realization`` curves, when given, are drawn as thin background
    lines so record-to-record spread stays visible behind the mean.
    """
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    with plt.rc_context({"svg.hashsalt": "artifact"}):
        fig, ax = plt.subplots(figsize=(7.0, 4.2))
        if per_realization:
            for curve in per_realization:
                ax.plot(times, curve, color="0.75", linewidth=0.6, zorder=1)
        if stderr is not None:
            ax.fill_between(
                times,
                mean_energy - stderr,
                mean_energy + stderr,
                alpha=0.3,
                color="tab:blue",
                linewidth=0,
                zorder=2,
                label="mean +/- stderr",
            )
        ax.plot(times, mean_energy, color="tab:blue", linewidth=1.8, zorder=3, label="mean")
        ax.set_xlabel("t")
        ax.set_ylabel("energy")
        ax.set_title(title)
        ax.legend(loc="best", frameon=False)
        ax.grid(True, alpha=0.25)
        description = ""
        if echo:
            description = "; ".join(f"{key}={value}" for key, value in echo.items())
        fig.savefig(
            path,
            format="svg",
            metadata={"Date": None, "Description": description},
            bbox_inches="tight",
        )
        plt.close(fig)
