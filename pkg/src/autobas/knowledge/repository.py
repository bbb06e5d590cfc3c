"""Repository facade: one object owning the registry, rule store, and both
data zones under a single directory tree:

    <root>/registry/devices.json      — snapshot, atomically rewritten
    <root>/rules/rules.jsonl          — append-only rule versions
    <root>/rt/segment-*.jsonl         — per-tick vectors in hour segments
    <root>/rt/watermarks.json         — export / eviction watermarks
    <root>/hist/*.jsonl               — append-only historical streams

Cross-zone operations live here: baseline updates (archive the old baseline
in the historical zone, activate the new one in the registry), the
commissioning marker, and portable export.
"""

from __future__ import annotations

import tarfile
from dataclasses import replace
from pathlib import Path

from autobas.errors import InsufficientDataError, ValidationError
from autobas.knowledge.records import BASELINE_PROVENANCES, Baseline
from autobas.knowledge.registry import DeviceRegistry
from autobas.knowledge.rules import RuleStore
from autobas.knowledge.zones import HistoricalZone, RealTimeZone

COMMISSIONING_REPORT = "commissioning"


class KnowledgeRepository:
    def __init__(
        self,
        root: str | Path,
        *,
        rt_retention_ticks: int = 1440,
        rt_segment_ticks: int = 60,
        rt_fsync: bool = False,
        hist_fsync: bool = True,
        min_baseline_samples: int = 30,
    ):
        self.root = Path(root)
        self.root.mkdir(parents=True, exist_ok=True)
        self.min_baseline_samples = min_baseline_samples
        self.registry = DeviceRegistry(self.root / "registry")
        self.rules = RuleStore(self.root / "rules", fsync=hist_fsync)
        self.rt = RealTimeZone(
            self.root / "rt",
            retention_ticks=rt_retention_ticks,
            segment_ticks=rt_segment_ticks,
            fsync=rt_fsync,
        )
        self.hist = HistoricalZone(self.root / "hist", fsync=hist_fsync)

    # ------------------------------------------------------------------
    # baselines
    # ------------------------------------------------------------------

    def update_baseline(
        self, point_id: str, stats: Baseline, provenance: str, *, tick: int
    ) -> None:
        """Activate a new baseline for a point, archiving the old one with
        its provenance. Rejects baselines built from too few samples."""

        if provenance not in BASELINE_PROVENANCES:
            raise ValidationError(
                f"unknown baseline provenance {provenance!r}; "
                f"expected one of {BASELINE_PROVENANCES}"
            )
        if stats.sample_count < self.min_baseline_samples:
            raise InsufficientDataError(
                f"baseline for {point_id!r} has {stats.sample_count} samples; "
                f"minimum is {self.min_baseline_samples}"
            )
        device = self.registry.owner_of(point_id)
        point = device.point(point_id)
        self.hist.archive_baseline(
            {
                "point_id": point_id,
                "tick": tick,
                "provenance": provenance,
                "old": point.baseline.to_dict() if point.baseline else None,
                "new": stats.to_dict(),
            }
        )
        self.registry.update(device.with_point(replace(point, baseline=stats)))

    # ------------------------------------------------------------------
    # commissioning marker
    # ------------------------------------------------------------------

    def record_commissioning(self, body: dict) -> None:
        self.hist.append_report(COMMISSIONING_REPORT, body)

    def is_commissioned(self) -> bool:
        """True when the building has a completed commissioning on record.

        Requires both the registry and the historical commissioning report:
        losing the historical zone therefore forces re-commissioning."""

        return (
            self.registry.count() > 0
            and len(self.hist.reports(COMMISSIONING_REPORT)) > 0
        )

    # ------------------------------------------------------------------

    def export_archive(self, dest: str | Path) -> Path:
        """Write a portable .tar.gz of the whole repository tree."""

        dest = Path(dest)
        dest.parent.mkdir(parents=True, exist_ok=True)
        with tarfile.open(dest, "w:gz") as tar:
            for sub in ("registry", "rules", "rt", "hist"):
                path = self.root / sub
                if path.exists():
                    tar.add(path, arcname=sub)
        return dest

    def close(self) -> None:
        self.rules.close()
        self.rt.close()
        self.hist.close()
