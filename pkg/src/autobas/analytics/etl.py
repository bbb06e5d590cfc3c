"""Batch export from the real-time zone to the historical zone.

Each cycle rolls every complete, not-yet-exported hour of state vectors into
one hourly aggregate row, advances the export watermark, and lets the
real-time zone evict segments the watermark has passed. Aggregate rows are
idempotent by hour key, so a cycle that crashed mid-export converges to the
crash-free outcome on the next run — re-appending an identical row is a
no-op, and the watermark only advances after the rows it covers landed.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Mapping

from autobas.knowledge import KnowledgeRepository
from autobas.knowledge.zones import aggregate_vectors

logger = logging.getLogger(__name__)

TICKS_PER_HOUR = 60
ETL_REPORT_KIND = "etl"


@dataclass(frozen=True)
class ETLReport:
    ran_at_tick: int
    exported_lo: int  # export watermark before the cycle
    exported_hi: int  # export watermark after the cycle (exclusive tick)
    hours: tuple[int, ...]  # hour keys covered by this cycle
    rows_written: int  # newly appended aggregate rows (idempotent hits excluded)
    evicted_below: int  # RT-zone eviction watermark after the cycle

    def to_dict(self) -> dict:
        return {
            "ran_at_tick": self.ran_at_tick,
            "exported_lo": self.exported_lo,
            "exported_hi": self.exported_hi,
            "hours": list(self.hours),
            "rows_written": self.rows_written,
            "evicted_below": self.evicted_below,
        }

    @classmethod
    def from_dict(cls, d: Mapping) -> ETLReport:
        return cls(
            ran_at_tick=int(d["ran_at_tick"]),
            exported_lo=int(d["exported_lo"]),
            exported_hi=int(d["exported_hi"]),
            hours=tuple(int(h) for h in d["hours"]),
            rows_written=int(d["rows_written"]),
            evicted_below=int(d["evicted_below"]),
        )


def etl_cycle(
    repo: KnowledgeRepository,
    *,
    now_tick: int | None = None,
    ticks_per_hour: int = TICKS_PER_HOUR,
) -> ETLReport:
    """Export complete hours, advance the watermark, evict, persist a report.

    A cycle with nothing new to export returns a zero-row report and leaves
    no trace in the historical zone.
    """

    rt, hist = repo.rt, repo.hist
    start = rt.exported_below
    latest = rt.latest_tick()
    ran_at = now_tick if now_tick is not None else (latest if latest is not None else 0)

    if latest is None:
        return ETLReport(ran_at, start, start, (), 0, rt.evicted_below)

    available_end = latest + 1  # ticks [0, available_end) may exist
    first_hour = start // ticks_per_hour
    end_hour = available_end // ticks_per_hour  # hours [first_hour, end_hour) complete

    rows_written = 0
    hours: list[int] = []
    for hour in range(first_hour, end_hour):
        tick_lo = hour * ticks_per_hour
        tick_hi = (hour + 1) * ticks_per_hour - 1
        chunk = rt.read(tick_lo, tick_hi)
        if not chunk.vectors:
            # The hour never reached the RT zone (total persistence loss);
            # there is nothing to aggregate and nothing to wait for.
            logger.warning("hour %d has no persisted vectors; skipping", hour)
            continue
        if chunk.missing:
            logger.warning(
                "hour %d aggregates over %d missing ticks", hour, len(chunk.missing)
            )
        row = aggregate_vectors(chunk.vectors, hour, tick_lo, tick_hi)
        if hist.append_aggregate(row):
            rows_written += 1
        hours.append(hour)

    new_below = max(start, end_hour * ticks_per_hour)
    if new_below > start:
        rt.mark_exported_below(new_below)
    evicted_below = rt.evict()

    report = ETLReport(
        ran_at_tick=ran_at,
        exported_lo=start,
        exported_hi=new_below,
        hours=tuple(hours),
        rows_written=rows_written,
        evicted_below=evicted_below,
    )
    if hours or new_below > start:
        hist.append_report(ETL_REPORT_KIND, report.to_dict())
    return report
