"""Commissioning processes: the start-up survey and the ongoing chains.

Start-up commissioning runs five steps over a probe window of live traffic:
discover every emitting point, classify each one, validate observed values
against the class's manufacturer range, capture a statistical baseline, and
populate the knowledge repository. A point that cannot be classified or that
read outside its range becomes a failure item; commissioning finalizes only
when every item passes or an operator explicitly waives it.

Ongoing commissioning reacts to change instead of starting over. Each
accepted change (a confirmed repair, a detected drift) opens a chain that
walks: opened -> optimizing (parameter search for the affected system) ->
awaiting_samples (collect fresh readings under the new schedule) -> closed
(the readings become the point's new baseline, provenance "OCx"). Every step
is journaled so the event -> ticket -> optimization -> baseline lineage is
auditable.
"""

from __future__ import annotations

import statistics
from dataclasses import dataclass, field, replace
from typing import Iterable, Mapping, Sequence

from autobas.discovery import (
    UNKNOWN_LABEL,
    CandidatePoint,
    collect_samples,
    discover,
)
from autobas.errors import ConflictError, InsufficientDataError, NotFoundError
from autobas.knowledge import (
    Baseline,
    DeviceRecord,
    KnowledgeRepository,
    OperatingRange,
    PointRecord,
)
from autobas.messages import Source

PASS = "pass"
FAIL = "fail"
WAIVED = "waived"

REASON_UNCLASSIFIED = "unclassified"
REASON_RANGE = "range"


def locf_series(
    rows: Sequence[tuple[int, int, float]],
    *,
    start_ts: int,
    ticks: int,
    tick_ms: int,
) -> list[float]:
    """Per-tick values reconstructed from change-of-value rows.

    A reading holds until the next one arrives; ticks before the first
    report are backfilled with it. ``rows`` are (seq, ts, value), ts-ordered.
    """

    if not rows:
        raise InsufficientDataError("no samples to build a series from")
    ordered = sorted(rows, key=lambda r: (r[1], r[0]))
    series: list[float] = []
    i = -1
    for k in range(ticks):
        window_end = start_ts + (k + 1) * tick_ms
        while i + 1 < len(ordered) and ordered[i + 1][1] < window_end:
            i += 1
        series.append(ordered[max(i, 0)][2])
    return series


@dataclass(frozen=True)
class CommissioningItem:
    """Survey outcome for one discovered point."""

    device_id: str
    point_id: str
    unit: str
    label: str
    confidence: float
    range_ok: bool | None  # None when the point could not be classified
    baseline: Baseline | None
    status: str  # pass | fail | waived
    reason: str | None = None
    waived_by: str | None = None
    observed_lo: float = 0.0
    observed_hi: float = 0.0

    def to_dict(self) -> dict:
        return {
            "device_id": self.device_id,
            "point_id": self.point_id,
            "unit": self.unit,
            "label": self.label,
            "confidence": self.confidence,
            "range_ok": self.range_ok,
            "baseline": self.baseline.to_dict() if self.baseline else None,
            "status": self.status,
            "reason": self.reason,
            "waived_by": self.waived_by,
            "observed_lo": self.observed_lo,
            "observed_hi": self.observed_hi,
        }


@dataclass(frozen=True)
class CommissioningReport:
    started_tick: int
    probe_ticks: int
    items: tuple[CommissioningItem, ...]
    finished_tick: int | None = None
    complete: bool = False

    def counts(self) -> dict[str, int]:
        out = {PASS: 0, FAIL: 0, WAIVED: 0}
        for item in self.items:
            out[item.status] += 1
        return out

    def to_dict(self) -> dict:
        return {
            "started_tick": self.started_tick,
            "probe_ticks": self.probe_ticks,
            "finished_tick": self.finished_tick,
            "complete": self.complete,
            "counts": self.counts(),
            "items": [i.to_dict() for i in self.items],
        }


class CommissioningSession:
    """One start-up commissioning attempt over a fixed probe window."""

    def __init__(
        self,
        repo: KnowledgeRepository,
        classifier,
        broker,
        *,
        probe_start_tick: int,
        probe_ticks: int,
        epoch_ms: int,
        tick_ms: int = 60_000,
        topics: Sequence[str] = ("telemetry", "quarantine"),
        manifest: Iterable[DeviceRecord] = (),
        unknown_range_margin: float = 0.5,
    ):
        if probe_ticks < 1:
            raise ValueError("probe_ticks must be >= 1")
        self.repo = repo
        self.classifier = classifier
        self.broker = broker
        self.probe_start_tick = probe_start_tick
        self.probe_ticks = probe_ticks
        self.epoch_ms = epoch_ms
        self.tick_ms = tick_ms
        self.topics = tuple(topics)
        self.manifest = tuple(manifest)
        self.unknown_range_margin = unknown_range_margin
        self.report: CommissioningReport | None = None
        self.finalized = False

    def _ts(self, tick: int) -> int:
        return self.epoch_ms + tick * self.tick_ms

    # ------------------------------------------------------------------
    # steps 1-4: discover, classify, validate, baseline
    # ------------------------------------------------------------------

    def probe(self) -> CommissioningReport:
        since = self._ts(self.probe_start_tick)
        until = self._ts(self.probe_start_tick + self.probe_ticks - 1)
        candidates = discover(
            self.broker, registry=self.repo.registry,
            topics=self.topics, since_ts=since, until_ts=until,
        )
        samples = collect_samples(
            self.broker, topics=self.topics, since_ts=since, until_ts=until
        )

        items = []
        for candidate in candidates:
            _, rows = samples[(candidate.device_id, candidate.point_id)]
            series = locf_series(
                rows, start_ts=since, ticks=self.probe_ticks, tick_ms=self.tick_ms
            )
            baseline = Baseline(
                mean=statistics.fmean(series),
                std=statistics.pstdev(series),
                sample_count=len(series),
                window_ticks=len(series),
            )
            label, confidence = self.classifier.classify(candidate)
            if label == UNKNOWN_LABEL:
                items.append(
                    CommissioningItem(
                        device_id=candidate.device_id,
                        point_id=candidate.point_id,
                        unit=candidate.unit,
                        label=label,
                        confidence=confidence,
                        range_ok=None,
                        baseline=baseline,
                        status=FAIL,
                        reason=REASON_UNCLASSIFIED,
                        observed_lo=candidate.vmin,
                        observed_hi=candidate.vmax,
                    )
                )
                continue
            entry = self.classifier.catalog_entry(label)
            range_ok = (
                entry.operating_lo <= candidate.vmin
                and candidate.vmax <= entry.operating_hi
            )
            items.append(
                CommissioningItem(
                    device_id=candidate.device_id,
                    point_id=candidate.point_id,
                    unit=entry.canonical_unit,
                    label=label,
                    confidence=confidence,
                    range_ok=range_ok,
                    baseline=baseline,
                    status=PASS if range_ok else FAIL,
                    reason=None if range_ok else REASON_RANGE,
                    observed_lo=candidate.vmin,
                    observed_hi=candidate.vmax,
                )
            )
        self.report = CommissioningReport(
            started_tick=self.probe_start_tick,
            probe_ticks=self.probe_ticks,
            items=tuple(items),
        )
        return self.report

    # ------------------------------------------------------------------
    # human-in-the-loop gate
    # ------------------------------------------------------------------

    def issues(self) -> list[dict]:
        """Unresolved failure items as ticket-able issue descriptions."""

        if self.report is None:
            return []
        out = []
        for item in self.report.items:
            if item.status != FAIL:
                continue
            out.append(
                {
                    "point_id": item.point_id,
                    "device_id": item.device_id,
                    "reason": item.reason,
                    "request": (
                        "HumanLabelRequest"
                        if item.reason == REASON_UNCLASSIFIED
                        else "MaintenanceRequest"
                    ),
                    "observed": [item.observed_lo, item.observed_hi],
                }
            )
        return out

    def waive(self, point_id: str, *, actor_id: str) -> CommissioningItem:
        """Operator accepts a failure item as-is; it no longer blocks."""

        if self.report is None:
            raise ConflictError("nothing to waive before the probe has run")
        for i, item in enumerate(self.report.items):
            if item.point_id != point_id:
                continue
            if item.status != FAIL:
                raise ConflictError(
                    f"item {point_id!r} is {item.status}, not waivable"
                )
            waived = replace(item, status=WAIVED, waived_by=actor_id)
            items = list(self.report.items)
            items[i] = waived
            self.report = replace(self.report, items=tuple(items))
            return waived
        raise NotFoundError(f"no commissioning item for point {point_id!r}")

    def all_clear(self) -> bool:
        return self.report is not None and all(
            item.status in (PASS, WAIVED) for item in self.report.items
        )

    # ------------------------------------------------------------------
    # step 5: populate the repository
    # ------------------------------------------------------------------

    def _device_record(self, device_id: str, items: list[CommissioningItem],
                       tick: int) -> DeviceRecord:
        points = []
        labels = []
        for item in items:
            if item.label == UNKNOWN_LABEL:
                # Waived without a class: register with a widened observed
                # envelope and no baseline; detection stays suppressed until
                # an ongoing-commissioning pass baselines it.
                span = max(item.observed_hi - item.observed_lo, 1.0)
                margin = self.unknown_range_margin * span
                operating = OperatingRange(
                    item.observed_lo - margin, item.observed_hi + margin, item.unit
                )
                baseline = None
            else:
                entry = self.classifier.catalog_entry(item.label)
                operating = OperatingRange(
                    entry.operating_lo, entry.operating_hi, entry.canonical_unit
                )
                baseline = item.baseline
                labels.append(entry)
            points.append(
                PointRecord(
                    point_id=item.point_id,
                    unit=item.unit,
                    clazz=item.label,
                    operating_range=operating,
                    baseline=baseline,
                )
            )
        if labels:
            votes: dict[tuple[str, str], int] = {}
            for entry in labels:
                key = (entry.device_clazz, entry.system)
                votes[key] = votes.get(key, 0) + 1
            (clazz, system), _ = sorted(
                votes.items(), key=lambda kv: (-kv[1], kv[0])
            )[0]
        else:
            clazz, system = UNKNOWN_LABEL, "unassigned"
        return DeviceRecord(
            device_id=device_id,
            system=system,
            clazz=clazz,
            points=tuple(points),
            source=Source.NATIVE,
            commissioned_at=self._ts(tick),
        )

    def finalize(self, *, tick: int) -> CommissioningReport:
        """Register everything and mark the building commissioned."""

        if self.finalized:
            raise ConflictError("commissioning session already finalized")
        if self.report is None:
            raise ConflictError("probe() must run before finalize()")
        if not self.report.items:
            raise InsufficientDataError(
                "no points were discovered during the probe window; "
                "commissioning is blocked"
            )
        if not self.all_clear():
            pending = [i.point_id for i in self.report.items if i.status == FAIL]
            raise ConflictError(
                f"commissioning blocked by unresolved items: {pending}"
            )

        by_device: dict[str, list[CommissioningItem]] = {}
        for item in self.report.items:
            by_device.setdefault(item.device_id, []).append(item)
        for device_id, items in sorted(by_device.items()):
            record = self._device_record(device_id, items, tick)
            try:
                self.repo.registry.get(device_id)
            except NotFoundError:
                self.repo.registry.register(record)
            else:
                self.repo.registry.update(record)
        for record in self.manifest:
            try:
                self.repo.registry.get(record.device_id)
            except NotFoundError:
                self.repo.registry.register(record)

        self.report = replace(
            self.report, finished_tick=tick, complete=True
        )
        self.repo.record_commissioning(self.report.to_dict())
        self.finalized = True
        return self.report


# ---------------------------------------------------------------------------
# ongoing commissioning
# ---------------------------------------------------------------------------

OCX_OPENED = "opened"
OCX_OPTIMIZING = "optimizing"
OCX_AWAITING = "awaiting_samples"
OCX_CLOSED = "closed"


@dataclass
class OCxChain:
    chain_id: str
    target: str  # point_id whose baseline will be recaptured
    system: str
    cause: str  # event or ticket id that started the chain
    opened_at: int
    status: str = OCX_OPENED
    samples: list[float] = field(default_factory=list)
    closed_at: int | None = None

    def to_dict(self) -> dict:
        return {
            "chain_id": self.chain_id,
            "target": self.target,
            "system": self.system,
            "cause": self.cause,
            "opened_at": self.opened_at,
            "status": self.status,
            "sample_count": len(self.samples),
            "closed_at": self.closed_at,
        }


class OCxManager:
    """Tracks ongoing-commissioning chains and lands their baselines."""

    def __init__(
        self,
        repo: KnowledgeRepository,
        *,
        min_samples: int = 30,
        on_closed=None,
    ):
        self.repo = repo
        self.min_samples = min_samples
        self._on_closed = on_closed
        self._chains: dict[str, OCxChain] = {}

    def _journal(self, chain: OCxChain, step: str, tick: int, **extra) -> None:
        entry = {"kind": "ocx", "step": step, "tick": tick, **chain.to_dict()}
        entry.update(extra)
        self.repo.hist.append_journal(entry)

    # ------------------------------------------------------------------

    def open(self, *, target: str, system: str, cause: str, tick: int) -> OCxChain:
        existing = self.open_chain_for(target)
        if existing is not None:
            return existing
        chain = OCxChain(
            chain_id=f"ocx-{target}-{tick:09d}",
            target=target,
            system=system,
            cause=cause,
            opened_at=tick,
        )
        self._chains[chain.chain_id] = chain
        self._journal(chain, OCX_OPENED, tick)
        return chain

    def mark_optimizing(self, chain_id: str, *, tick: int) -> OCxChain:
        chain = self.get(chain_id)
        if chain.status != OCX_OPENED:
            raise ConflictError(
                f"chain {chain_id} is {chain.status}, cannot start optimizing"
            )
        chain.status = OCX_OPTIMIZING
        self._journal(chain, OCX_OPTIMIZING, tick)
        return chain

    def schedule_established(
        self, chain_id: str, *, tick: int, schedule_summary: Mapping | None = None
    ) -> OCxChain:
        chain = self.get(chain_id)
        if chain.status not in (OCX_OPENED, OCX_OPTIMIZING):
            raise ConflictError(
                f"chain {chain_id} is {chain.status}, cannot await samples"
            )
        chain.status = OCX_AWAITING
        chain.samples.clear()
        self._journal(
            chain, OCX_AWAITING, tick,
            schedule=dict(schedule_summary) if schedule_summary else None,
        )
        return chain

    def record_sample(self, target: str, value: float, *, tick: int) -> OCxChain | None:
        """Feed one fresh reading; returns the chain if this closed it."""

        chain = self.open_chain_for(target)
        if chain is None or chain.status != OCX_AWAITING:
            return None
        chain.samples.append(value)
        if len(chain.samples) < self.min_samples:
            return None
        baseline = Baseline(
            mean=statistics.fmean(chain.samples),
            std=statistics.pstdev(chain.samples),
            sample_count=len(chain.samples),
            window_ticks=len(chain.samples),
        )
        try:
            self.repo.update_baseline(target, baseline, "OCx", tick=tick)
        except InsufficientDataError:
            # The repository wants more than we have; keep collecting.
            self._journal(chain, "retry", tick, needed=self.repo.min_baseline_samples)
            return None
        chain.status = OCX_CLOSED
        chain.closed_at = tick
        self._journal(chain, OCX_CLOSED, tick, baseline=baseline.to_dict())
        if self._on_closed is not None:
            self._on_closed(chain)
        return chain

    # ------------------------------------------------------------------

    def get(self, chain_id: str) -> OCxChain:
        chain = self._chains.get(chain_id)
        if chain is None:
            raise NotFoundError(f"no ongoing-commissioning chain {chain_id!r}")
        return chain

    def open_chain_for(self, target: str) -> OCxChain | None:
        for chain in self._chains.values():
            if chain.target == target and chain.status != OCX_CLOSED:
                return chain
        return None

    def chains(self, status: str | None = None) -> list[OCxChain]:
        out = [
            c for c in self._chains.values()
            if status is None or c.status == status
        ]
        return sorted(out, key=lambda c: c.chain_id)
