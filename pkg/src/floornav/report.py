"""Study output: delimited error tables, a heatmap JSON, and a rendered figure.

Everything lands in one output directory so a report is a self-contained
artifact: three CSV tables (one header row, UTF-8, missing cells as "n/s"),
``report.json`` in the schema the heatmap viewer consumes, and
``heatmap.png`` drawn over the floor plan when one is available.
"""

from __future__ import annotations

import csv
import json
from pathlib import Path

import matplotlib
import numpy as np

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402  (backend must be pinned first)

from .evaluation import ErrorTable, MISSING_LABEL, SweepReport  # noqa: E402


def write_table_csv(table: ErrorTable, path: str | Path) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["row", *table.col_labels])
        for label, row in zip(table.row_labels, table.cells):
            writer.writerow(
                [label, *(MISSING_LABEL if np.isnan(c) else f"{c:.6g}" for c in row)]
            )


def write_report_json(report: SweepReport, path: str | Path) -> None:
    Path(path).write_text(
        json.dumps(report.to_json_dict(), indent=1), encoding="utf-8"
    )


def render_heatmap(
    report: SweepReport,
    path: str | Path,
    floor_plan: np.ndarray | None = None,
) -> None:
    """Draw estimate markers sized and colored by error over the floor plan.

    Ground truth shows as open circles; bigger, warmer estimate markers mean
    larger error.  Unlocalized points render as crosses.
    """
    fig, ax = plt.subplots(figsize=(9, 6))
    if floor_plan is not None:
        ax.imshow(floor_plan, cmap="gray", origin="upper")
    else:
        ax.invert_yaxis()

    located = [h for h in report.heatmap if h.est is not None]
    missing = [h for h in report.heatmap if h.est is None]
    if located:
        errors = np.array([h.error_ft for h in located])
        vmax = max(float(errors.max()), 1e-9)
        scatter = ax.scatter(
            [h.est.x for h in located],
            [h.est.y for h in located],
            s=30.0 + 220.0 * errors / vmax,
            c=errors,
            cmap="RdYlGn_r",
            vmin=0.0,
            vmax=vmax,
            alpha=0.85,
            zorder=3,
        )
        fig.colorbar(scatter, ax=ax, label="location error (ft)")
    ax.scatter(
        [h.gt.x for h in report.heatmap],
        [h.gt.y for h in report.heatmap],
        facecolors="none",
        edgecolors="black",
        s=40,
        zorder=4,
        label="ground truth",
    )
    if missing:
        ax.scatter(
            [h.gt.x for h in missing],
            [h.gt.y for h in missing],
            marker="x",
            color="blue",
            s=50,
            zorder=5,
            label="not localized",
        )
    for h in report.heatmap:
        ax.annotate(str(h.index), (h.gt.x, h.gt.y), fontsize=7, textcoords="offset points",
                    xytext=(4, 4))
    ax.set_aspect("equal")
    ax.legend(loc="upper right", fontsize=8)
    ax.set_title("Localization accuracy")
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def write_report(
    report: SweepReport,
    out_dir: str | Path,
    floor_plan: np.ndarray | None = None,
) -> dict[str, Path]:
    """Write the complete artifact set; returns the path of each piece."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    paths = {
        "location_by_alpha": out / "location_by_alpha.csv",
        "location_by_beta": out / "location_by_beta.csv",
        "direction_by_rate": out / "direction_by_rate.csv",
        "report": out / "report.json",
        "heatmap": out / "heatmap.png",
    }
    write_table_csv(report.location_by_alpha, paths["location_by_alpha"])
    write_table_csv(report.location_by_beta, paths["location_by_beta"])
    write_table_csv(report.direction_by_rate, paths["direction_by_rate"])
    write_report_json(report, paths["report"])
    render_heatmap(report, paths["heatmap"], floor_plan)
    return paths
