"""Liveness watchdog: nothing waits forever.

Track a concern when it is dispatched to external actors; clear it when it
reaches a terminal resolution. Anything still tracked after the timeout is
escalated exactly once via the callback (typically: a Manager ticket).
"""

from __future__ import annotations

from typing import Callable


class Watchdog:
    def __init__(
        self,
        timeout_ticks: int,
        on_escalate: Callable[[str, int], None],
    ):
        if timeout_ticks < 1:
            raise ValueError("timeout_ticks must be >= 1")
        self.timeout_ticks = timeout_ticks
        self._on_escalate = on_escalate
        self._deadlines: dict[str, int] = {}
        self._escalated: set[str] = set()

    def track(self, key: str, tick: int) -> None:
        self._deadlines.setdefault(key, tick + self.timeout_ticks)

    def clear(self, key: str) -> None:
        self._deadlines.pop(key, None)
        self._escalated.discard(key)

    def tracked(self) -> list[str]:
        return sorted(self._deadlines)

    def check(self, tick: int) -> list[str]:
        """Escalate every overdue key once; keys stay tracked until cleared."""

        fired = []
        for key, deadline in sorted(self._deadlines.items()):
            if tick >= deadline and key not in self._escalated:
                self._escalated.add(key)
                fired.append(key)
                self._on_escalate(key, tick)
        return fired
