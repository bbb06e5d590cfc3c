"""Analytics behavior: fault/drift classification, schedule search with its
brute-force oracle, and idempotent hourly export."""

from __future__ import annotations

import itertools

import pytest

from autobas.analytics import (
    ChangeDetector,
    ETLReport,
    EvalOutcome,
    EventKind,
    ParameterSchedule,
    ScheduleEntry,
    SearchSpace,
    Severity,
    etl_cycle,
    optimize,
    scan,
)
from autobas.errors import EvaluationError, ValidationError
from autobas.knowledge import (
    Baseline,
    DeviceRecord,
    DeviceRegistry,
    KnowledgeRepository,
    OperatingRange,
    PointRecord,
)
from autobas.messages import PointEntry, Provenance, Quality, Source, StateVector

T0 = 1_767_225_600_000
TICK_MS = 60_000


def point_record(pid: str, lo: float, hi: float, mean: float | None, std: float = 0.2,
                 clazz: str = "Chiller") -> PointRecord:
    baseline = None
    if mean is not None:
        baseline = Baseline(mean=mean, std=std, sample_count=60, window_ticks=60)
    return PointRecord(
        point_id=pid,
        unit="degC",
        clazz=clazz,
        operating_range=OperatingRange(lo, hi, "degC"),
        baseline=baseline,
    )


def make_registry(tmp_path, *records: PointRecord) -> DeviceRegistry:
    registry = DeviceRegistry(tmp_path / "registry")
    for rec in records:
        registry.register(
            DeviceRecord(
                device_id=f"dev_{rec.point_id}",
                system="hvac",
                clazz=rec.clazz,
                points=(rec,),
                source=Source.NATIVE,
                commissioned_at=T0,
            )
        )
    return registry


def vector(tick: int, values: dict[str, float | tuple[float, Quality]]) -> StateVector:
    entries = {}
    for pid, v in values.items():
        value, quality = v if isinstance(v, tuple) else (v, Quality.GOOD)
        entries[pid] = PointEntry(value, Provenance.OBSERVED, 0, quality)
    return StateVector(tick=tick, ts=T0 + tick * TICK_MS, entries=entries)


def feed(detector: ChangeDetector, pid: str, values, start_tick: int = 0):
    events = []
    for i, v in enumerate(values):
        events.extend(detector.observe(vector(start_tick + i, {pid: v})))
    return events


class TestFaultDetection:
    def test_bias_out_of_range_is_fault(self, tmp_path):
        # Oracle: baseline N(7.0, 0.2), range [4,15], sustained 17.2 after a
        # sensor bias. The windowed mean violates the range -> Fault.
        registry = make_registry(tmp_path, point_record("supply", 4, 15, 7.0))
        detector = ChangeDetector(registry)
        events = feed(detector, "supply", [17.2] * 30)
        assert len(events) == 1
        ev = events[0]
        assert ev.kind is EventKind.FAULT
        assert ev.severity is Severity.CRITICAL
        assert ev.target == "supply" and ev.system == "hvac"
        assert ev.detected_at == 29  # the tick the window filled
        assert ev.evidence.statistic == "range_violation"
        assert ev.evidence.value == pytest.approx(2.2)

    def test_single_spike_is_fault_once_window_is_warm(self, tmp_path):
        registry = make_registry(tmp_path, point_record("supply", 4, 15, 7.0))
        detector = ChangeDetector(registry)
        assert feed(detector, "supply", [7.0] * 40) == []
        events = feed(detector, "supply", [16.5], start_tick=40)
        assert [e.kind for e in events] == [EventKind.FAULT]

    def test_no_refire_while_open_then_refire_after_resolve(self, tmp_path):
        registry = make_registry(tmp_path, point_record("supply", 4, 15, 7.0))
        detector = ChangeDetector(registry)
        events = feed(detector, "supply", [17.2] * 60)
        assert len(events) == 1
        detector.resolve("supply", EventKind.FAULT)
        more = feed(detector, "supply", [17.2], start_tick=60)
        assert len(more) == 1 and more[0].detected_at == 60

    def test_quality_collapse_is_fault(self, tmp_path):
        registry = make_registry(tmp_path, point_record("zone", 4, 15, 7.0))
        detector = ChangeDetector(registry)
        good = [(7.0, Quality.GOOD)] * 14
        bad = [(7.0, Quality.SUSPECT)] * 16  # 16/30 > 0.5
        events = feed(detector, "zone", good + bad)
        assert len(events) == 1
        assert events[0].evidence.statistic == "suspect_fraction"
        assert events[0].evidence.value == pytest.approx(16 / 30)

    def test_half_suspect_is_not_collapse(self, tmp_path):
        registry = make_registry(tmp_path, point_record("zone", 4, 15, 7.0))
        detector = ChangeDetector(registry)
        mixed = [(7.0, Quality.SUSPECT)] * 15 + [(7.0, Quality.GOOD)] * 15
        assert feed(detector, "zone", mixed * 2) == []


class TestDriftDetection:
    def test_sustained_shift_is_drift_with_persistence(self, tmp_path):
        # Oracle: baseline mean 50 std 2, drift to a sustained 62.5 inside the
        # meter range. Windowed mean crosses the 4-sigma gate once 20 of 30
        # samples are new, then must persist 10 ticks: event at tick 58.
        registry = make_registry(
            tmp_path, point_record("power", 0, 200, 50.0, std=2.0)
        )
        detector = ChangeDetector(registry)
        events = feed(detector, "power", [50.0] * 30)
        events += feed(detector, "power", [62.5] * 40, start_tick=30)
        assert len(events) == 1
        ev = events[0]
        assert ev.kind is EventKind.CONCEPT_DRIFT
        assert ev.severity is Severity.WARNING
        assert ev.detected_at == 58
        assert ev.evidence.statistic == "mean_shift_z"
        assert ev.evidence.value > 4.0 and ev.evidence.threshold == 4.0

    def test_brief_excursion_does_not_persist(self, tmp_path):
        registry = make_registry(
            tmp_path, point_record("power", 0, 200, 50.0, std=2.0)
        )
        detector = ChangeDetector(registry)
        # A +10 pulse (5 sigma per sample) needs 25 of 30 window samples
        # shifted before the windowed mean clears the 4-sigma gate, so a
        # 25-tick excursion stays over the gate for only 6 consecutive
        # ticks — short of the 10-tick persistence requirement.
        values = [50.0] * 30 + [60.0] * 25 + [50.0] * 60
        assert feed(detector, "power", values) == []

    def test_fault_precludes_drift(self, tmp_path):
        # Out-of-range values must never be reported as drift even though the
        # mean also departs the baseline: the two kinds are exclusive.
        registry = make_registry(tmp_path, point_record("supply", 4, 15, 7.0))
        detector = ChangeDetector(registry)
        events = feed(detector, "supply", [17.2] * 80)
        assert {e.kind for e in events} == {EventKind.FAULT}

    def test_steady_state_emits_nothing(self, tmp_path):
        registry = make_registry(
            tmp_path,
            point_record("supply", 4, 15, 7.0),
            point_record("power", 0, 200, 50.0, std=2.0),
        )
        vectors = [
            vector(i, {"supply": 7.0 + 0.1 * (i % 3), "power": 50.0 - (i % 5)})
            for i in range(500)
        ]
        assert scan(vectors, registry) == []

    def test_zero_std_baseline_uses_absolute_tolerance(self, tmp_path, caplog):
        registry = make_registry(
            tmp_path, point_record("setpoint", 4, 15, 7.0, std=0.0)
        )
        detector = ChangeDetector(registry)
        with caplog.at_level("WARNING"):
            assert feed(detector, "setpoint", [7.5] * 60) == []  # within 1.0
            events = feed(detector, "setpoint", [8.5] * 60, start_tick=60)
        assert len(events) == 1
        assert events[0].evidence.statistic == "mean_shift_abs"
        assert events[0].evidence.threshold == 1.0
        assert sum("zero-std baseline" in r.message for r in caplog.records) == 1

    def test_zero_std_tolerance_is_per_class(self, tmp_path):
        registry = make_registry(
            tmp_path, point_record("setpoint", 4, 15, 7.0, std=0.0)
        )
        detector = ChangeDetector(
            registry, zero_std_tolerance={"Chiller": 3.0, "*": 0.5}
        )
        assert feed(detector, "setpoint", [8.5] * 80) == []  # 1.5 < 3.0

    def test_missing_baseline_raises_commissioning_needed_once(self, tmp_path):
        registry = make_registry(tmp_path, point_record("new_pt", 4, 15, None))
        raised = []
        detector = ChangeDetector(
            registry, on_commissioning_needed=lambda pid, tick: raised.append((pid, tick))
        )
        assert feed(detector, "new_pt", [14.9] * 80) == []  # huge shift, no baseline
        assert detector.commissioning_needed == ["new_pt"]
        assert raised == [("new_pt", 29)]

    def test_suppression_and_rebaseline(self, tmp_path):
        registry = make_registry(
            tmp_path, point_record("power", 0, 200, 50.0, std=2.0)
        )
        detector = ChangeDetector(registry)
        feed(detector, "power", [50.0] * 30)
        detector.suppress_drift("power")
        assert feed(detector, "power", [62.5] * 60, start_tick=30) == []

        # New baseline lands: statistics restart, and the new normal is quiet.
        rec = registry.point_record("power")
        device = registry.owner_of("power")
        new_baseline = Baseline(mean=62.5, std=2.0, sample_count=60, window_ticks=60)
        registry.update(
            device.with_point(
                PointRecord(
                    point_id=rec.point_id, unit=rec.unit, clazz=rec.clazz,
                    operating_range=rec.operating_range, baseline=new_baseline,
                )
            )
        )
        detector.rebaselined("power")
        assert feed(detector, "power", [62.5] * 80, start_tick=90) == []

    def test_unregistered_point_is_skipped(self, tmp_path):
        registry = make_registry(tmp_path, point_record("supply", 4, 15, 7.0))
        detector = ChangeDetector(registry)
        events = feed(detector, "stranger", [999.0] * 50)
        assert events == []

    def test_event_dict_round_trip(self, tmp_path):
        registry = make_registry(tmp_path, point_record("supply", 4, 15, 7.0))
        (ev,) = feed(ChangeDetector(registry), "supply", [17.2] * 30)
        from autobas.analytics import ChangeEvent

        assert ChangeEvent.from_dict(ev.to_dict()) == ev


# ---------------------------------------------------------------------------
# optimizer
# ---------------------------------------------------------------------------


def single_window_space(*candidates: float) -> SearchSpace:
    return SearchSpace(
        system="hvac", unit="degC",
        windows=((0, 1440),), candidates=tuple(candidates),
    )


def comfort_ok(energy_fn):
    return lambda a: EvalOutcome(energy_kwh=energy_fn(a), comfort_fraction=1.0)


class TestOptimizer:
    def test_matches_brute_force_oracle(self):
        # Oracle: independently evaluate the same grid and take the argmin.
        space = single_window_space(6.0, 7.0, 8.0, 9.0)
        energy = lambda a: (a[0] - 7.4) ** 2 + 3.0
        result = optimize(space, comfort_ok(energy), None, tick=100)
        oracle = min(
            itertools.product(space.candidates, repeat=1), key=energy
        )
        assert result.status == "optimal"
        assert result.schedule.setpoints() == oracle == (7.0,)
        assert result.evaluations == 4
        assert result.schedule.objective_value == pytest.approx(energy((7.0,)))
        assert result.schedule.established_at == 100

    def test_tie_breaks_to_lowest_setpoint_earliest_window(self):
        space = SearchSpace(
            system="hvac", unit="degC",
            windows=((0, 720), (720, 1440)), candidates=(6.0, 7.0),
        )
        energy = lambda a: abs(a[0] - a[1])  # minima at (6,6) and (7,7)
        result = optimize(space, comfort_ok(energy), None, tick=0)
        assert result.schedule.setpoints() == (6.0, 6.0)

    def test_comfort_constraint_excludes_cheap_candidates(self):
        space = single_window_space(6.0, 7.0, 8.0, 9.0)

        def evaluator(a):
            return EvalOutcome(
                energy_kwh=a[0],  # cheaper when lower
                comfort_fraction=1.0 if a[0] >= 8.0 else 0.5,
            )

        result = optimize(space, evaluator, None, tick=0)
        assert result.schedule.setpoints() == (8.0,)

    def test_infeasible_returns_incumbent_unchanged(self):
        space = single_window_space(6.0, 7.0)
        incumbent = space.schedule_for((7.0,), objective=120.0, tick=5)
        never_comfortable = lambda a: EvalOutcome(10.0, 0.9)
        result = optimize(space, never_comfortable, incumbent, tick=50)
        assert result.status == "infeasible"
        assert result.schedule is incumbent
        assert not result.improved
        assert optimize(space, never_comfortable, None, tick=50).schedule is None

    def test_evaluator_retry_then_escalate(self):
        space = single_window_space(6.0, 7.0)
        failures = {"n": 0}

        def flaky(a):
            if a == (6.0,) and failures["n"] == 0:
                failures["n"] += 1
                raise RuntimeError("twin hiccup")
            return EvalOutcome(a[0], 1.0)

        result = optimize(space, flaky, None, tick=0)
        assert result.schedule.setpoints() == (6.0,)  # retry succeeded

        def broken(a):
            raise RuntimeError("twin down")

        with pytest.raises(EvaluationError):
            optimize(space, broken, None, tick=0)

    def test_large_grid_uses_descent_and_finds_separable_optimum(self):
        space = SearchSpace(
            system="hvac", unit="degC",
            windows=((0, 480), (480, 960), (960, 1440)),
            candidates=(5.0, 6.0, 7.0, 8.0, 9.0),
        )
        assert space.grid_size() == 125  # > budget of 64
        targets = (6.0, 9.0, 5.0)
        energy = lambda a: sum((s - t) ** 2 for s, t in zip(a, targets))
        incumbent = space.schedule_for((7.0, 7.0, 7.0), objective=99.0, tick=0)
        result = optimize(space, comfort_ok(energy), incumbent, tick=10)
        oracle = min(
            itertools.product(space.candidates, repeat=3), key=energy
        )
        assert result.schedule.setpoints() == oracle == targets
        assert result.evaluations < space.grid_size()
        assert result.improved

    def test_improved_flag_false_when_incumbent_stands(self):
        space = single_window_space(6.0, 7.0, 8.0)
        energy = lambda a: a[0]
        first = optimize(space, comfort_ok(energy), None, tick=0)
        again = optimize(space, comfort_ok(energy), first.schedule, tick=9)
        assert not again.improved
        assert again.schedule.setpoints() == first.schedule.setpoints()

    def test_schedule_validation(self):
        entry = lambda lo, hi, sp: ScheduleEntry(lo, hi, sp, "degC")
        with pytest.raises(ValidationError):
            ParameterSchedule("hvac", (), 0.0, 0)
        with pytest.raises(ValidationError):  # gap
            ParameterSchedule("hvac", (entry(0, 700, 7.0), entry(720, 1440, 8.0)), 0.0, 0)
        with pytest.raises(ValidationError):  # short coverage
            ParameterSchedule("hvac", (entry(0, 1000, 7.0),), 0.0, 0)
        sched = ParameterSchedule(
            "hvac", (entry(0, 720, 7.0), entry(720, 1440, 9.0)), 12.5, 44
        )
        assert sched.setpoint_at(0) == 7.0
        assert sched.setpoint_at(719) == 7.0
        assert sched.setpoint_at(720) == 9.0
        assert sched.setpoint_at(1440 + 10) == 7.0  # wraps
        assert ParameterSchedule.from_dict(sched.to_dict()) == sched

    def test_search_space_validation(self):
        with pytest.raises(ValidationError):
            SearchSpace("hvac", "degC", ((0, 1440),), ())
        with pytest.raises(ValidationError):
            SearchSpace("hvac", "degC", ((0, 1440),), (7.0, 6.0))
        with pytest.raises(ValidationError):
            SearchSpace("hvac", "degC", ((0, 720),), (6.0,))


# ---------------------------------------------------------------------------
# ETL
# ---------------------------------------------------------------------------


def fill_rt(repo: KnowledgeRepository, ticks: range, points=("p1", "p2")):
    for tick in ticks:
        entries = {
            pid: PointEntry(20.0 + i + (tick % 7) * 0.5, Provenance.OBSERVED, 0)
            for i, pid in enumerate(points)
        }
        repo.rt.write(StateVector(tick=tick, ts=T0 + tick * TICK_MS, entries=entries))


class TestETL:
    def test_two_hours_export_and_conservation(self, tmp_path):
        repo = KnowledgeRepository(tmp_path)
        fill_rt(repo, range(120))
        report = etl_cycle(repo)
        assert report.hours == (0, 1)
        assert report.rows_written == 2
        assert (report.exported_lo, report.exported_hi) == (0, 120)
        assert repo.hist.aggregated_hours() == [0, 1]
        total_samples = sum(
            repo.hist.aggregate(h)["points"]["p1"]["n"] for h in (0, 1)
        )
        assert total_samples == 120  # conservation: every exported tick counted
        assert len(repo.hist.reports("etl")) == 1

    def test_rerun_with_no_new_ticks_is_a_quiet_noop(self, tmp_path):
        repo = KnowledgeRepository(tmp_path)
        fill_rt(repo, range(120))
        etl_cycle(repo)
        again = etl_cycle(repo)
        assert again.rows_written == 0
        assert again.hours == ()
        assert (again.exported_lo, again.exported_hi) == (120, 120)
        assert len(repo.hist.reports("etl")) == 1  # no-op cycles leave no trace

    def test_partial_hour_waits(self, tmp_path):
        repo = KnowledgeRepository(tmp_path)
        fill_rt(repo, range(90))
        report = etl_cycle(repo)
        assert report.hours == (0,)
        assert report.exported_hi == 60
        fill_rt(repo, range(90, 120))
        report2 = etl_cycle(repo)
        assert report2.hours == (1,)
        assert repo.hist.aggregated_hours() == [0, 1]

    def test_crash_mid_export_converges_to_crash_free_outcome(self, tmp_path):
        crashed = KnowledgeRepository(tmp_path / "crashed")
        clean = KnowledgeRepository(tmp_path / "clean")
        for repo in (crashed, clean):
            fill_rt(repo, range(120))

        # Crash simulation: hour 0's row landed but the watermark write and
        # hour 1 never happened.
        from autobas.knowledge.zones import aggregate_vectors

        chunk = crashed.rt.read(0, 59)
        crashed.hist.append_aggregate(aggregate_vectors(chunk.vectors, 0, 0, 59))
        assert crashed.rt.exported_below == 0

        crashed_report = etl_cycle(crashed)
        clean_report = etl_cycle(clean)
        assert crashed_report.hours == clean_report.hours == (0, 1)
        assert crashed_report.rows_written == 1  # hour 0 was an idempotent hit
        for hour in (0, 1):
            assert crashed.hist.aggregate(hour) == clean.hist.aggregate(hour)
        assert crashed.rt.exported_below == clean.rt.exported_below == 120

    def test_eviction_follows_export_watermark(self, tmp_path):
        repo = KnowledgeRepository(
            tmp_path, rt_retention_ticks=120, rt_segment_ticks=60
        )
        fill_rt(repo, range(300))
        report = etl_cycle(repo)
        assert report.exported_hi == 300
        assert report.rows_written == 5
        # Retention keeps [180, 299]; eviction stays behind the export mark.
        assert report.evicted_below == 180
        assert repo.rt.read(180, 299).complete
        total = sum(
            repo.hist.aggregate(h)["points"]["p1"]["n"]
            for h in repo.hist.aggregated_hours()
        )
        assert total == 300

    def test_empty_repository_is_a_noop(self, tmp_path):
        repo = KnowledgeRepository(tmp_path)
        report = etl_cycle(repo)
        assert report == ETLReport(0, 0, 0, (), 0, 0)
        assert repo.hist.reports("etl") == []

    def test_hour_with_gaps_aggregates_what_landed(self, tmp_path):
        repo = KnowledgeRepository(tmp_path)
        fill_rt(repo, range(45))  # ticks 45..59 lost before persistence
        fill_rt(repo, range(60, 120))
        report = etl_cycle(repo)
        assert report.hours == (0, 1)
        assert repo.hist.aggregate(0)["points"]["p1"]["n"] == 45
        assert repo.hist.aggregate(1)["points"]["p1"]["n"] == 60
        assert ETLReport.from_dict(report.to_dict()) == report
