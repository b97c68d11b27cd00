"""Scaling report: delimited table plus rendered figures.

The report path takes provenance records (or pre-built series), groups run
times by MPI rank count, and writes a CSV table of (np, time, efficiency)
next to PNG figures of the time and efficiency curves.
"""

from __future__ import annotations

import csv
from pathlib import Path
from typing import Iterable, Mapping, Optional

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402  (backend must be set first)

from .analytics import ScalingSeries, parallel_efficiency
from .records import ProvenanceRecord


def series_from_records(records: Iterable[ProvenanceRecord]) -> ScalingSeries:
    """Group record wall times by np (mean over repeats)."""
    by_np: dict[int, list[float]] = {}
    for record in records:
        mpi = record.resources.get("mpi")
        if not mpi:
            continue
        by_np.setdefault(int(mpi["np"]), []).append(
            float(record.outcome["wall_time_hours"]))
    if not by_np:
        raise ValueError("no records carry an MPI plan; nothing to report")
    points = tuple((n, sum(ts) / len(ts)) for n, ts in sorted(by_np.items()))
    return ScalingSeries(points=points)


def write_scaling_table(series_map: Mapping[str, ScalingSeries], path: Path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["series", "np", "time_hours", "efficiency_percent"])
        for label, series in series_map.items():
            eff = dict(parallel_efficiency(series))
            for n, t in series.points:
                writer.writerow([label, n, f"{t:.6f}", f"{eff[n]:.1f}"])


def _plot(series_map: Mapping[str, ScalingSeries], value_fn, ylabel: str,
          path: Path) -> None:
    fig, ax = plt.subplots(figsize=(6.0, 4.0))
    for label, series in series_map.items():
        nps, values = zip(*value_fn(series))
        ax.plot(nps, values, marker="o", label=label)
    ax.set_xlabel("MPI ranks (np)")
    ax.set_ylabel(ylabel)
    ax.set_xscale("log", base=2)
    ax.grid(True, alpha=0.3)
    if len(series_map) > 1:
        ax.legend()
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def write_report(series_map: Mapping[str, ScalingSeries], outdir,
                 basename: str = "scaling") -> list[Path]:
    """Write CSV plus time/efficiency figures; returns the created paths."""
    outdir = Path(outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    csv_path = outdir / f"{basename}.csv"
    time_png = outdir / f"{basename}_time.png"
    eff_png = outdir / f"{basename}_efficiency.png"
    write_scaling_table(series_map, csv_path)
    _plot(series_map, lambda s: list(s.points), "wall time (h)", time_png)
    _plot(series_map, parallel_efficiency, "parallel efficiency (%)", eff_png)
    return [csv_path, time_png, eff_png]


def report_from_records(records: Iterable[ProvenanceRecord], outdir,
                        label: Optional[str] = None,
                        basename: str = "scaling") -> list[Path]:
    series = series_from_records(records)
    return write_report({label or "runs": series}, outdir, basename=basename)
