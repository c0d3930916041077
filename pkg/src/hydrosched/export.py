"""CSV and manifest output for simulation results.

Money is written in thousands of EUR and volumes in thousands of m3; water
values (EUR per m3) are unit-free under that scaling and written as is.
"""

from __future__ import annotations

import csv
import json
from pathlib import Path
from typing import Sequence

from .simulator import RunResult, percentile_bands

KILO = 1e3
SUMMARY_FIELDS = ("seed", "strategy", "day", "cum_revenue")


def _write(path: Path, header: Sequence[str], rows) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        wr = csv.writer(fh, lineterminator="\n")
        wr.writerow(header)
        wr.writerows(rows)


def _fmt(x: float) -> str:
    return f"{x:.6f}"


def export_results(results: dict[str, list[RunResult]], out_dir: str | Path, reservoirs: Sequence[str],
                   config_digest: str, config_path: str, command: Sequence[str] = ()) -> dict:
    """Write per-day, summary, percentile and planner CSVs plus ``manifest.json``."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    runs = [r for rs in results.values() for r in rs]

    day_header = (["seed", "strategy", "day", "date"]
                  + [f"start_level_{r}" for r in reservoirs] + [f"end_level_{r}" for r in reservoirs]
                  + ["bid_spot_mwh", "bid_up_mwh", "bid_down_mwh",
                     "revenue_spot", "revenue_up", "revenue_down", "revenue_total", "fallback"]
                  + [f"water_value_{r}" for r in reservoirs])
    day_rows, summary_rows, stats_rows = [], [], []
    for r in runs:
        cum = r.cumulative_revenue
        for d, c in zip(r.days, cum):
            rv = d.revenue
            day_rows.append(
                [r.seed, r.strategy, d.day, d.date]
                + [_fmt(x / KILO) for x in d.start_level] + [_fmt(x / KILO) for x in d.end_level]
                + [_fmt(d.s.sum()), _fmt(d.u.sum()), _fmt(d.v.sum()),
                   _fmt(rv.spot / KILO), _fmt(rv.up / KILO), _fmt(rv.down / KILO), _fmt(rv.total / KILO),
                   int(d.fallback)]
                + [_fmt(x) for x in d.water_values])
            summary_rows.append([r.seed, r.strategy, d.day, _fmt(c / KILO)])
        for s in r.planner_stats:
            stats_rows.append([r.seed, r.strategy, s["day"], s["N"], s["rows"], s["cols"],
                               f"{s['wall_seconds']:.3f}"])

    files = {"days": out / "days.csv", "summary": out / "summary.csv",
             "percentiles": out / "percentiles.csv", "planner_stats": out / "planner_stats.csv"}
    _write(files["days"], day_header, day_rows)
    _write(files["summary"], SUMMARY_FIELDS, summary_rows)
    band_rows = []
    for strategy, rs in results.items():
        if not rs:
            continue
        bands = percentile_bands(rs)
        for d in range(bands.shape[1]):
            band_rows.append([strategy, d] + [_fmt(x / KILO) for x in bands[:, d]])
    _write(files["percentiles"], ["strategy", "day", "p10", "p50", "p90"], band_rows)
    _write(files["planner_stats"], ["seed", "strategy", "day", "N", "rows", "cols", "wall_seconds"],
           stats_rows)
    manifest = {
        "config": str(config_path),
        "config_sha256": config_digest,
        "seeds": sorted({r.seed for r in runs}),
        "strategies": list(results),
        "command": list(command),
        "units": {"money": "EUR x 1e3", "volume": "m3 x 1e3", "energy": "MWh"},
        "files": {k: v.name for k, v in files.items()},
    }
    (out / "manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    return manifest
