"""Stream-engine behavior: state-vector assembly, imputation, unit
transforms, quarantine routing, persistence retry, and replay identity."""

from __future__ import annotations

import random

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from autobas.broker import Broker
from autobas.errors import ValidationError
from autobas.messages import (
    PointEntry,
    Provenance,
    Quality,
    SensorMessage,
    Source,
    StateVector,
)
from autobas.pipeline import (
    PointView,
    StaticRegistryView,
    StreamEngine,
    TransformSpec,
    ingest_tick,
    load_transforms,
)

TICK_MS = 60_000
T0 = 1_767_225_600_000


def msg(point: str, seq: int, value: float, *, ts: int = T0, device: str | None = None,
        unit: str = "degC", quality: Quality = Quality.GOOD) -> SensorMessage:
    return SensorMessage(
        device_id=device or f"dev_{point}",
        point_id=point,
        seq_no=seq,
        ts=ts,
        value=value,
        unit=unit,
        quality=quality,
        source=Source.NATIVE,
    )


def registry_for(*points: str, unit: str = "degC", baseline: float = 7.0) -> StaticRegistryView:
    return StaticRegistryView(
        PointView(device_id=f"dev_{p}", point_id=p, unit=unit, baseline_mean=baseline)
        for p in points
    )


class TestIngestTick:
    def test_observed_and_carried_forward(self):
        # Oracle: batch = {A: 21.0}, prev has B=5.0 Observed
        #   -> A=21.0 Observed age 0; B=5.0 Imputed age 1.
        registry = registry_for("A", "B")
        prev = StateVector(
            tick=0,
            ts=T0,
            entries={
                "A": PointEntry(20.0, Provenance.OBSERVED, 0),
                "B": PointEntry(5.0, Provenance.OBSERVED, 0),
            },
        )
        sv, quarantined = ingest_tick(
            [msg("A", 2, 21.0, ts=T0 + TICK_MS)], prev, registry, {}, 1, T0 + TICK_MS
        )
        assert quarantined == []
        assert sv.entries["A"] == PointEntry(21.0, Provenance.OBSERVED, 0)
        assert sv.entries["B"] == PointEntry(5.0, Provenance.IMPUTED, 1)

    def test_latest_seq_wins_within_window(self):
        registry = registry_for("A")
        for batch in ([msg("A", 7, 1.0), msg("A", 8, 2.0)],
                      [msg("A", 8, 2.0), msg("A", 7, 1.0)]):
            sv, _ = ingest_tick(batch, None, registry, {}, 0, T0)
            assert sv.entries["A"].value == 2.0
            assert sv.entries["A"].provenance is Provenance.OBSERVED

    def test_never_observed_seeds_baseline_and_ages_from_start(self):
        # Oracle: 3 ticks with no C messages, baseline mean 7.0
        #   -> C=7.0 Imputed, age 3.
        registry = registry_for("A", "C")
        prev = None
        for tick in range(3):
            batch = [msg("A", tick + 1, 20.0 + tick, ts=T0 + tick * TICK_MS)]
            prev, _ = ingest_tick(batch, prev, registry, {}, tick, T0 + tick * TICK_MS)
        entry = prev.entries["C"]
        assert entry.value == 7.0
        assert entry.provenance is Provenance.IMPUTED
        assert entry.age_ticks == 3

    def test_unregistered_message_is_quarantined_not_dropped(self):
        registry = registry_for("A")
        stranger = msg("ghost", 1, 9.9)
        sv, quarantined = ingest_tick([msg("A", 1, 20.0), stranger], None, registry, {}, 0, T0)
        assert quarantined == [stranger]
        assert "ghost" not in sv.entries

    def test_completeness_under_sparse_batches(self):
        registry = registry_for("A", "B", "C", "D")
        rng = random.Random(7)
        prev = None
        seqs = {p: 0 for p in "ABCD"}
        for tick in range(50):
            batch = []
            for p in "ABCD":
                if rng.random() < 0.3:
                    seqs[p] += 1
                    batch.append(msg(p, seqs[p], rng.uniform(0, 30), ts=T0 + tick * TICK_MS))
            prev, _ = ingest_tick(batch, prev, registry, {}, tick, T0 + tick * TICK_MS)
            assert set(prev.entries) == {"A", "B", "C", "D"}
            for entry in prev.entries.values():
                assert (entry.age_ticks == 0) == (entry.provenance is Provenance.OBSERVED)

    def test_late_message_flagged_but_observed(self):
        registry = registry_for("A")
        late = msg("A", 1, 20.0, ts=T0)  # belongs to the previous window
        sv, _ = ingest_tick([late], None, registry, {}, 1, T0 + TICK_MS)
        entry = sv.entries["A"]
        assert entry.late is True
        assert entry.provenance is Provenance.OBSERVED
        assert entry.age_ticks == 0

    def test_unit_mismatch_without_transform_downgrades_quality(self, caplog):
        registry = registry_for("A", unit="degC")
        sv, _ = ingest_tick([msg("A", 1, 68.0, unit="degF")], None, registry, {}, 0, T0)
        assert sv.entries["A"].quality is Quality.SUSPECT
        assert sv.entries["A"].value == 68.0


class TestTransformSpec:
    def test_fahrenheit_to_celsius(self):
        spec = TransformSpec("A", "degF", "degC", scale=5 / 9, offset=-160 / 9)
        value, unit = spec.apply(68.0, "degF")
        assert value == pytest.approx(20.0, abs=1e-12)
        assert unit == "degC"

    def test_applies_only_to_matching_unit(self):
        spec = TransformSpec("A", "degF", "degC", scale=5 / 9, offset=-160 / 9)
        assert spec.apply(20.0, "degC") == (20.0, "degC")

    def test_zero_scale_rejected(self):
        with pytest.raises(ValidationError):
            TransformSpec("A", "degF", "degC", scale=0.0)

    def test_clamp_bounds_converted_value(self):
        spec = TransformSpec("A", "raw", "degC", scale=1.0, clamp_lo=-40.0, clamp_hi=60.0)
        assert spec.apply(500.0, "raw") == (60.0, "degC")
        assert spec.apply(-500.0, "raw") == (-40.0, "degC")

    def test_load_transforms_rejects_duplicates(self):
        doc = {"point_id": "A", "from_unit": "degF", "to_unit": "degC", "scale": 5 / 9}
        with pytest.raises(ValidationError):
            load_transforms([doc, doc])

    def test_round_trip_through_dict(self):
        spec = TransformSpec("A", "degF", "degC", scale=5 / 9, offset=-160 / 9, clamp_hi=100.0)
        assert TransformSpec.from_dict(spec.to_dict()) == spec

    @given(
        scale=st.floats(min_value=1e-3, max_value=1e3, allow_nan=False),
        offset=st.floats(min_value=-1e4, max_value=1e4, allow_nan=False),
        value=st.floats(min_value=-1e5, max_value=1e5, allow_nan=False),
    )
    @settings(max_examples=200, deadline=None)
    def test_transform_then_inverse_is_identity(self, scale, offset, value):
        spec = TransformSpec("A", "raw", "canon", scale=scale, offset=offset)
        converted, unit = spec.apply(value, "raw")
        assert unit == "canon"
        assert spec.invert(converted) == pytest.approx(value, abs=1e-9, rel=1e-9)


class TestStreamEngine:
    def make_engine(self, tmp_path, registry, **kwargs):
        broker = Broker(tmp_path / "broker")
        return broker, StreamEngine(broker, registry, **kwargs)

    def test_advance_builds_vector_and_commits(self, tmp_path):
        registry = registry_for("A", "B")
        broker, engine = self.make_engine(tmp_path, registry)
        broker.publish("telemetry", msg("A", 1, 20.0))
        sv = engine.advance(0, T0)
        assert sv.entries["A"].provenance is Provenance.OBSERVED
        assert sv.entries["B"].provenance is Provenance.IMPUTED  # baseline seed
        # Offsets committed: a second advance with no new traffic imputes.
        sv2 = engine.advance(1, T0 + TICK_MS)
        assert sv2.entries["A"] == PointEntry(20.0, Provenance.IMPUTED, 1)

    def test_quarantine_routed_and_counted(self, tmp_path):
        registry = registry_for("A")
        broker, engine = self.make_engine(tmp_path, registry)
        broker.publish("telemetry", msg("ghost", 1, 1.0))
        broker.publish("telemetry", msg("ghost", 2, 2.0))
        engine.advance(0, T0)
        assert engine.quarantine_count == 2
        parked = [m for _, m in broker.read("quarantine", 0)]
        assert [m.seq_no for m in parked] == [1, 2]
        assert all(m.point_id == "ghost" for m in parked)

    def test_transform_applied_before_vector(self, tmp_path):
        registry = registry_for("A", unit="degC")
        transforms = {"A": TransformSpec("A", "degF", "degC", scale=5 / 9, offset=-160 / 9)}
        broker, engine = self.make_engine(tmp_path, registry, transforms=transforms)
        broker.publish("telemetry", msg("A", 1, 68.0, unit="degF"))
        sv = engine.advance(0, T0)
        assert sv.entries["A"].value == pytest.approx(20.0, abs=1e-12)
        assert sv.entries["A"].quality is Quality.GOOD

    def test_persist_retry_lands_exactly_once(self, tmp_path):
        registry = registry_for("A")
        calls, stored = [], []

        def flaky_persist(sv):
            calls.append(sv.tick)
            if len(calls) <= 2:
                raise OSError("repository outage")
            stored.append(sv)

        broker, engine = self.make_engine(
            tmp_path, registry, persist=flaky_persist, persist_attempts=3
        )
        broker.publish("telemetry", msg("A", 1, 20.0))
        engine.advance(0, T0)
        assert len(calls) == 3
        assert [sv.tick for sv in stored] == [0]
        assert engine.dead_letter == []

    def test_persist_exhaustion_dead_letters_with_alarm(self, tmp_path):
        registry = registry_for("A")
        alarms = []

        def broken_persist(sv):
            raise OSError("repository down")

        broker, engine = self.make_engine(
            tmp_path, registry, persist=broken_persist,
            persist_attempts=2, on_alarm=alarms.append,
        )
        broker.publish("telemetry", msg("A", 1, 20.0))
        sv = engine.advance(0, T0)  # must not raise
        assert [d.tick for d in engine.dead_letter] == [0]
        assert alarms and alarms[0]["kind"] == "PersistFailure"
        assert alarms[0]["attempts"] == 2
        # The loop keeps going afterwards.
        assert engine.advance(1, T0 + TICK_MS).tick == 1
        assert sv.entries["A"].value == 20.0

    def test_replay_is_byte_identical(self, tmp_path):
        # Live run: publishes interleaved with consumption, tick by tick.
        # Replay runs: the complete log already sits in the broker, and the
        # window-aware drain must reproduce the live batching exactly.
        registry = registry_for("A", "B", "C")
        broker = Broker(tmp_path / "broker")
        rng = random.Random(11)
        seqs = {p: 0 for p in "ABC"}
        traffic: dict[int, list[SensorMessage]] = {}
        for tick in range(60):
            traffic[tick] = []
            for p in "ABC":
                if rng.random() < 0.4:
                    seqs[p] += 1
                    traffic[tick].append(
                        msg(p, seqs[p], round(rng.uniform(0, 30), 3), ts=T0 + tick * TICK_MS)
                    )

        live = StreamEngine(broker, registry, consumer="live")
        first = []
        for tick in range(60):
            for m in traffic[tick]:
                broker.publish("telemetry", m)
            first.append(live.advance(tick, T0 + tick * TICK_MS).canonical_json())

        def replay(consumer: str, b: Broker) -> list[str]:
            engine = StreamEngine(b, registry, consumer=consumer)
            return [engine.advance(t, T0 + t * TICK_MS).canonical_json() for t in range(60)]

        assert replay("replay-a", broker) == first
        # ...including after a broker restart from disk.
        broker.close()
        reopened = Broker(tmp_path / "broker")
        assert replay("replay-b", reopened) == first

    def test_rehydrate_resumes_identically(self, tmp_path):
        registry = registry_for("A", "B")
        broker = Broker(tmp_path / "broker")
        rng = random.Random(5)
        seqs = {"A": 0, "B": 0}
        ticks = 30
        traffic = {}
        for tick in range(ticks):
            traffic[tick] = []
            for p in ("A", "B"):
                if rng.random() < 0.5:
                    seqs[p] += 1
                    traffic[tick].append(
                        msg(p, seqs[p], round(rng.uniform(0, 30), 3), ts=T0 + tick * TICK_MS)
                    )

        # Uninterrupted reference run (its own consumer group).
        reference = StreamEngine(broker, registry, consumer="ref")
        expected = []
        for tick in range(ticks):
            for m in traffic[tick]:
                broker.publish("telemetry", m)
            expected.append(reference.advance(tick, T0 + tick * TICK_MS).canonical_json())

        # Interrupted run: crash after tick 14, rehydrate from the persisted
        # vector, resume with the same consumer group from committed offsets.
        persisted: list[StateVector] = []
        engine = StreamEngine(broker, registry, consumer="live", persist=persisted.append)
        for tick in range(15):
            engine.advance(tick, T0 + tick * TICK_MS)
        del engine
        resumed = StreamEngine(broker, registry, consumer="live")
        resumed.rehydrate(StateVector.from_json(persisted[-1].canonical_json()))
        tail = [resumed.advance(t, T0 + t * TICK_MS).canonical_json() for t in range(15, ticks)]
        assert tail == expected[15:]
