"""The building's operating-mode state machine.

The transition relation is exactly seven edges:

    Initializing    + CommissioningComplete      -> Optimizing
    Initializing    + UpgradeComplete            -> Optimizing
    Optimizing      + OptimumFound               -> DetectingChange
    DetectingChange + DriftDetected              -> Optimizing
    DetectingChange + FaultDetected              -> Interfacing
    Interfacing     + FaultResolvedNoEquipChange -> DetectingChange
    Interfacing     + EquipmentChanged           -> Initializing

Every other (mode, stimulus) pair is rejected: the mode is unchanged and the
attempt is journaled as an anomaly. Detection stimuli (fault/drift) that
arrive in a mode with no edge for them are additionally queued and applied as
soon as a transition makes them legal, so a fault found mid-optimization is
deferred, never dropped.

The journal is the source of truth: every applied transition and every
anomaly is appended, and `replay` rebuilds the full mode history from those
entries alone.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Any, Callable, Iterable, Mapping

from autobas.states import BuildingMode, Stimulus

TRANSITIONS: dict[tuple[BuildingMode, Stimulus], BuildingMode] = {
    (BuildingMode.INITIALIZING, Stimulus.COMMISSIONING_COMPLETE): BuildingMode.OPTIMIZING,
    (BuildingMode.INITIALIZING, Stimulus.UPGRADE_COMPLETE): BuildingMode.OPTIMIZING,
    (BuildingMode.OPTIMIZING, Stimulus.OPTIMUM_FOUND): BuildingMode.DETECTING_CHANGE,
    (BuildingMode.DETECTING_CHANGE, Stimulus.DRIFT_DETECTED): BuildingMode.OPTIMIZING,
    (BuildingMode.DETECTING_CHANGE, Stimulus.FAULT_DETECTED): BuildingMode.INTERFACING,
    (BuildingMode.INTERFACING, Stimulus.FAULT_RESOLVED_NO_EQUIP_CHANGE): BuildingMode.DETECTING_CHANGE,
    (BuildingMode.INTERFACING, Stimulus.EQUIPMENT_CHANGED): BuildingMode.INITIALIZING,
}

# Stimuli produced by observation rather than by a process completing; they
# describe a condition that stays true, so an untimely arrival is deferred.
DEFERRABLE: frozenset[Stimulus] = frozenset(
    {Stimulus.FAULT_DETECTED, Stimulus.DRIFT_DETECTED}
)


def transition(mode: BuildingMode, stimulus: Stimulus) -> BuildingMode | None:
    """The pure relation: next mode, or None when the pair has no edge."""

    return TRANSITIONS.get((mode, stimulus))


@dataclass(frozen=True)
class ModeState:
    mode: BuildingMode
    since: int  # tick
    cause: str

    def to_dict(self) -> dict:
        return {"mode": self.mode.value, "since": self.since, "cause": self.cause}


class StateMachine:
    """Single-owner mode holder fed by a serialized stimulus stream.

    ``journal_sink`` receives one dict per applied transition and per
    anomaly; wire it to the historical zone's journal. The machine never
    writes anywhere else, so replaying those entries reconstructs it.
    """

    def __init__(
        self,
        journal_sink: Callable[[Mapping[str, Any]], Any] | None = None,
        *,
        initial: BuildingMode = BuildingMode.INITIALIZING,
        start_tick: int = 0,
        cause: str = "boot",
    ):
        self._journal = journal_sink or (lambda entry: None)
        self.state = ModeState(initial, start_tick, cause)
        self._history: list[ModeState] = [self.state]
        self._pending: list[tuple[Stimulus, str]] = []

    @property
    def mode(self) -> BuildingMode:
        return self.state.mode

    def history(self) -> list[ModeState]:
        return list(self._history)

    def pending(self) -> list[tuple[Stimulus, str]]:
        return list(self._pending)

    # ------------------------------------------------------------------

    def _apply(self, stimulus: Stimulus, cause: str, tick: int) -> None:
        new_mode = TRANSITIONS[(self.state.mode, stimulus)]
        self._journal(
            {
                "kind": "transition",
                "tick": tick,
                "from": self.state.mode.value,
                "to": new_mode.value,
                "stimulus": stimulus.value,
                "cause": cause,
            }
        )
        self.state = ModeState(new_mode, tick, cause)
        self._history.append(self.state)

    def _drain(self, tick: int) -> None:
        progressed = True
        while progressed:
            progressed = False
            for i, (stimulus, cause) in enumerate(self._pending):
                if (self.state.mode, stimulus) in TRANSITIONS:
                    del self._pending[i]
                    self._apply(stimulus, cause, tick)
                    progressed = True
                    break

    def submit(self, stimulus: Stimulus, *, cause: str, tick: int) -> ModeState:
        """Apply a stimulus (or journal the anomaly), then drain any deferred
        stimuli the new mode makes legal. Returns the resulting state."""

        if (self.state.mode, stimulus) in TRANSITIONS:
            self._apply(stimulus, cause, tick)
            self._drain(tick)
            return self.state

        deferred = stimulus in DEFERRABLE and (stimulus, cause) not in self._pending
        if deferred:
            self._pending.append((stimulus, cause))
        self._journal(
            {
                "kind": "anomaly",
                "tick": tick,
                "mode": self.state.mode.value,
                "stimulus": stimulus.value,
                "cause": cause,
                "disposition": "queued" if deferred else "rejected",
            }
        )
        return self.state

    # ------------------------------------------------------------------

    @staticmethod
    def replay(
        entries: Iterable[Mapping[str, Any]],
        *,
        initial: BuildingMode = BuildingMode.INITIALIZING,
        start_tick: int = 0,
        cause: str = "boot",
    ) -> list[ModeState]:
        """Rebuild the mode history from journal entries.

        Only "transition" entries move the mode; each is checked against the
        relation so a corrupted journal cannot replay into an illegal state.
        """

        history = [ModeState(initial, start_tick, cause)]
        for entry in entries:
            if entry.get("kind") != "transition":
                continue
            current = history[-1].mode
            stimulus = Stimulus(entry["stimulus"])
            expected = TRANSITIONS.get((current, stimulus))
            if expected is None or expected.value != entry["to"] or current.value != entry["from"]:
                raise ValueError(
                    f"journal entry does not follow the transition relation: "
                    f"{entry!r} from mode {current.value}"
                )
            history.append(
                ModeState(expected, int(entry["tick"]), str(entry["cause"]))
            )
        return history
