"""Rule store: persistent, versioned automation rules.

The backing file is append-only — saving a rule appends a new version and the
highest version per rule_id is the live one, so enable/disable and edits
leave a complete audit trail. At most one enabled rule may claim ``default``
per event kind.
"""

from __future__ import annotations

import threading
from dataclasses import replace
from pathlib import Path
from typing import Callable, Iterable

from autobas.errors import ConflictError, NotFoundError, ValidationError
from autobas.knowledge._files import AppendLog, read_jsonl
from autobas.knowledge.records import Rule

RULES_FILE = "rules.jsonl"


class RuleStore:
    def __init__(
        self,
        root: Path,
        *,
        fsync: bool = True,
        actor_resolver: Callable[[str], bool] | None = None,
    ):
        self.root = Path(root)
        self.root.mkdir(parents=True, exist_ok=True)
        self._log = AppendLog(self.root / RULES_FILE, fsync)
        self._lock = threading.RLock()
        self._live: dict[str, Rule] = {}
        self._versions: dict[str, int] = {}
        self.actor_resolver = actor_resolver
        for row in read_jsonl(self.root / RULES_FILE):
            rule = Rule.from_dict(row["rule"])
            self._live[rule.rule_id] = rule
            self._versions[rule.rule_id] = int(row["version"])

    def save(self, rule: Rule) -> int:
        """Append a new version of the rule; returns the version number."""

        with self._lock:
            if self.actor_resolver is not None:
                for action in rule.actions:
                    if not self.actor_resolver(action.actor_id):
                        raise ValidationError(
                            f"rule {rule.rule_id!r} names unknown actor "
                            f"{action.actor_id!r}"
                        )
            if rule.enabled and rule.is_default:
                for other in self._live.values():
                    if (
                        other.rule_id != rule.rule_id
                        and other.enabled
                        and other.is_default
                        and other.trigger.event_kind == rule.trigger.event_kind
                    ):
                        raise ConflictError(
                            f"rule {other.rule_id!r} is already the default for "
                            f"event kind {rule.trigger.event_kind!r}"
                        )
            version = self._versions.get(rule.rule_id, 0) + 1
            self._log.append({"version": version, "rule": rule.to_dict()})
            self._live[rule.rule_id] = rule
            self._versions[rule.rule_id] = version
            return version

    def get(self, rule_id: str) -> Rule:
        with self._lock:
            rule = self._live.get(rule_id)
            if rule is None:
                raise NotFoundError(f"unknown rule {rule_id!r}")
            return rule

    def rules(self, enabled_only: bool = False) -> list[Rule]:
        with self._lock:
            out: Iterable[Rule] = (self._live[r] for r in sorted(self._live))
            if enabled_only:
                out = (r for r in out if r.enabled)
            return list(out)

    def version(self, rule_id: str) -> int:
        with self._lock:
            return self._versions.get(rule_id, 0)

    def set_enabled(self, rule_id: str, enabled: bool) -> int:
        with self._lock:
            rule = self.get(rule_id)
            if rule.enabled == enabled:
                return self._versions[rule_id]
            return self.save(replace(rule, enabled=enabled))

    def close(self) -> None:
        self._log.close()
