"""Point discovery and rule-based classification.

Discovery scans the message fabric (telemetry plus the quarantine topic) and
produces one candidate per (device, point) with observed statistics: unit,
value envelope, sample count, cadence, and name tokens. Classification maps a
candidate to a class label with a confidence equal to the fraction of the
rule's specified features the candidate matched — a deterministic, auditable
stand-in for a learned model behind the same interface.

A candidate that matches no rule convincingly (best confidence below 0.5) or
that ties between different labels is classified Unknown with confidence 0,
which routes it to a human instead of guessing: a corrupted name must never
produce a confidently wrong class.
"""

from __future__ import annotations

import statistics
from dataclasses import dataclass
from typing import Iterable, Mapping, Protocol, Sequence

from autobas.errors import InsufficientDataError, ValidationError

UNKNOWN_LABEL = "Unknown"


def name_tokens(device_id: str, point_id: str) -> tuple[str, ...]:
    """Lowercased underscore-split tokens from both identifiers."""

    tokens = set(device_id.lower().split("_")) | set(point_id.lower().split("_"))
    tokens.discard("")
    return tuple(sorted(tokens))


@dataclass(frozen=True)
class CandidatePoint:
    """One discovered point feed with its probe-window statistics."""

    device_id: str
    point_id: str
    unit: str
    n_samples: int
    vmin: float
    vmax: float
    mean: float
    std: float
    first_ts: int
    last_ts: int
    tokens: tuple[str, ...]
    known: bool = False

    @property
    def is_static(self) -> bool:
        return self.n_samples < 2


def collect_samples(
    broker,
    *,
    topics: Sequence[str] = ("telemetry", "quarantine"),
    since_ts: int | None = None,
    until_ts: int | None = None,
) -> dict[tuple[str, str], tuple[str, list[tuple[int, int, float]]]]:
    """Gather per-point probe samples from the fabric.

    Returns {(device_id, point_id): (unit, [(seq_no, ts, value), ...])} with
    the rows seq-ordered. The same admission can sit on both telemetry and
    quarantine; rows merge on seq_no so each report counts once.
    """

    samples: dict[tuple[str, str], dict[int, tuple[int, float]]] = {}
    units: dict[tuple[str, str], str] = {}
    for topic in topics:
        if topic not in broker.topics():
            continue
        for _, msg in broker.read(topic, 0):
            if since_ts is not None and msg.ts < since_ts:
                continue
            if until_ts is not None and msg.ts > until_ts:
                continue
            key = (msg.device_id, msg.point_id)
            samples.setdefault(key, {})[msg.seq_no] = (msg.ts, msg.value)
            units[key] = msg.unit
    return {
        key: (units[key], [(seq,) + by_seq[seq] for seq in sorted(by_seq)])
        for key, by_seq in samples.items()
    }


def discover(
    broker,
    *,
    registry=None,
    topics: Sequence[str] = ("telemetry", "quarantine"),
    since_ts: int | None = None,
    until_ts: int | None = None,
) -> list[CandidatePoint]:
    """Scan the fabric and return each observed point exactly once, sorted by
    point_id. Points already present in the registry are marked known. An
    empty fabric yields an empty list."""

    collected = collect_samples(
        broker, topics=topics, since_ts=since_ts, until_ts=until_ts
    )
    out = []
    for (device_id, point_id), (unit, rows) in collected.items():
        ordered = [(ts, value) for _, ts, value in rows]
        values = [v for _, v in ordered]
        known = (
            registry is not None and registry.lookup(device_id, point_id) is not None
        )
        out.append(
            CandidatePoint(
                device_id=device_id,
                point_id=point_id,
                unit=unit,
                n_samples=len(values),
                vmin=min(values),
                vmax=max(values),
                mean=statistics.fmean(values),
                std=statistics.pstdev(values) if len(values) > 1 else 0.0,
                first_ts=ordered[0][0],
                last_ts=ordered[-1][0],
                tokens=name_tokens(device_id, point_id),
                known=known,
            )
        )
    return sorted(out, key=lambda c: c.point_id)


# ----------------------------------------------------------------------
# classification
# ----------------------------------------------------------------------


@dataclass(frozen=True)
class ClassifierRule:
    """One row of the rule table. Every non-empty field is a feature; the
    confidence of a match is matched_features / specified_features."""

    label: str
    unit: str | None = None
    range_lo: float | None = None
    range_hi: float | None = None
    name_all: tuple[str, ...] = ()
    name_any: tuple[str, ...] = ()
    activity: str | None = None  # "active" | "static" | None

    def __post_init__(self):
        if not self.label:
            raise ValidationError("rule label must be non-empty")
        if (self.range_lo is None) != (self.range_hi is None):
            raise ValidationError(f"rule {self.label!r}: range must give both bounds")
        if self.activity not in (None, "active", "static"):
            raise ValidationError(
                f"rule {self.label!r}: activity must be 'active' or 'static'"
            )
        if self.specified() == 0:
            raise ValidationError(f"rule {self.label!r} specifies no features")

    def specified(self) -> int:
        n = 0
        n += self.unit is not None
        n += self.range_lo is not None
        n += bool(self.name_all or self.name_any)
        n += self.activity is not None
        return n

    def matched(self, c: CandidatePoint) -> int:
        n = 0
        if self.unit is not None and c.unit == self.unit:
            n += 1
        if self.range_lo is not None and self.range_lo <= c.vmin and c.vmax <= self.range_hi:
            n += 1
        if self.name_all or self.name_any:
            ok = all(t in c.tokens for t in self.name_all)
            if ok and self.name_any:
                ok = any(t in c.tokens for t in self.name_any)
            n += ok
        if self.activity is not None and (self.activity == "static") == c.is_static:
            n += 1
        return n

    def to_dict(self) -> dict:
        doc: dict = {"label": self.label}
        if self.unit is not None:
            doc["unit"] = self.unit
        if self.range_lo is not None:
            doc["range"] = [self.range_lo, self.range_hi]
        if self.name_all:
            doc["name_all"] = list(self.name_all)
        if self.name_any:
            doc["name_any"] = list(self.name_any)
        if self.activity is not None:
            doc["activity"] = self.activity
        return doc

    @classmethod
    def from_dict(cls, doc: Mapping) -> ClassifierRule:
        rng = doc.get("range")
        return cls(
            label=doc["label"],
            unit=doc.get("unit"),
            range_lo=None if rng is None else float(rng[0]),
            range_hi=None if rng is None else float(rng[1]),
            name_all=tuple(doc.get("name_all", ())),
            name_any=tuple(doc.get("name_any", ())),
            activity=doc.get("activity"),
        )


@dataclass(frozen=True)
class CatalogEntry:
    """Registration metadata for one class label."""

    label: str
    canonical_unit: str
    operating_lo: float
    operating_hi: float
    system: str
    device_clazz: str

    def to_dict(self) -> dict:
        return {
            "canonical_unit": self.canonical_unit,
            "operating_range": [self.operating_lo, self.operating_hi],
            "system": self.system,
            "device_clazz": self.device_clazz,
        }

    @classmethod
    def from_dict(cls, label: str, doc: Mapping) -> CatalogEntry:
        lo, hi = doc["operating_range"]
        return cls(
            label=label,
            canonical_unit=doc["canonical_unit"],
            operating_lo=float(lo),
            operating_hi=float(hi),
            system=doc["system"],
            device_clazz=doc["device_clazz"],
        )


class Classifier(Protocol):
    """Pluggable classification interface; a learned model can replace the
    rule table behind it."""

    def classify(self, candidate: CandidatePoint) -> tuple[str, float]: ...


class RuleTableClassifier:
    def __init__(
        self,
        rules: Iterable[ClassifierRule],
        catalog: Mapping[str, CatalogEntry],
        *,
        min_samples: int = 1,
    ):
        self.rules = list(rules)
        self.catalog = dict(catalog)
        self.min_samples = min_samples
        labels = [r.label for r in self.rules]
        if len(set(labels)) != len(labels):
            raise ValidationError("duplicate rule labels in classifier table")
        missing = [r.label for r in self.rules if r.label not in self.catalog]
        if missing:
            raise ValidationError(f"rules without catalog entries: {missing}")

    def classify(self, candidate: CandidatePoint) -> tuple[str, float]:
        """Deterministic (label, confidence). Unknown/0 when nothing matches
        convincingly or the best score is shared by different labels."""

        if candidate.n_samples < self.min_samples:
            raise InsufficientDataError(
                f"candidate {candidate.point_id!r} has {candidate.n_samples} "
                f"samples; classification needs >= {self.min_samples}"
            )
        # Exact fraction comparison (cross-multiplied integers) so ties are
        # ties, not float accidents.
        best: list[ClassifierRule] = []
        best_m, best_s = 0, 1
        for rule in self.rules:
            m, s = rule.matched(candidate), rule.specified()
            if m == 0:
                continue
            if m * best_s > best_m * s:
                best, best_m, best_s = [rule], m, s
            elif m * best_s == best_m * s:
                best.append(rule)
        if not best or best_m * 2 < best_s:  # confidence < 0.5
            return UNKNOWN_LABEL, 0.0
        if len({r.label for r in best}) > 1:
            return UNKNOWN_LABEL, 0.0
        return best[0].label, best_m / best_s

    def catalog_entry(self, label: str) -> CatalogEntry:
        entry = self.catalog.get(label)
        if entry is None:
            raise ValidationError(f"no catalog entry for label {label!r}")
        return entry

    def to_doc(self) -> dict:
        return {
            "rules": [r.to_dict() for r in self.rules],
            "catalog": {
                label: entry.to_dict() for label, entry in sorted(self.catalog.items())
            },
        }

    @classmethod
    def from_doc(cls, doc: Mapping, *, min_samples: int = 1) -> RuleTableClassifier:
        rules = [ClassifierRule.from_dict(r) for r in doc["rules"]]
        catalog = {
            label: CatalogEntry.from_dict(label, entry)
            for label, entry in doc["catalog"].items()
        }
        return cls(rules, catalog, min_samples=min_samples)


def default_classification_doc() -> dict:
    """The built-in rule table and registration catalog for the reference
    building's point classes."""

    return {
        "rules": [
            {"label": "ZoneTempSensor", "unit": "degC", "range": [10, 35],
             "name_all": ["temp"], "name_any": ["zone"]},
            {"label": "ChilledSupplyTemp", "unit": "degC", "range": [4, 15],
             "name_all": ["chiller", "supply"]},
            {"label": "ChilledReturnTemp", "unit": "degC", "range": [4, 20],
             "name_all": ["chiller", "return"]},
            {"label": "ChilledSetpoint", "unit": "degC", "range": [4, 15],
             "name_all": ["chiller", "setpoint"]},
            {"label": "HotSupplyTemp", "unit": "degC", "range": [30, 90],
             "name_all": ["boiler", "supply"]},
            {"label": "HotSetpoint", "unit": "degC", "range": [30, 90],
             "name_all": ["boiler", "setpoint"]},
            {"label": "EquipmentPowerMeter", "unit": "kW", "range": [0, 300],
             "name_all": ["power"],
             "name_any": ["chiller", "boiler", "gen", "lighting"]},
            {"label": "BuildingPowerMeter", "unit": "kW", "range": [0, 500],
             "name_all": ["main", "power"]},
            {"label": "ShadePosition", "unit": "frac", "range": [0, 1],
             "name_any": ["shade", "position", "blind"]},
            {"label": "MainsVoltage", "unit": "V", "range": [180, 260],
             "name_any": ["voltage", "mains"]},
            {"label": "RunStatus", "unit": "bool", "range": [0, 1],
             "activity": "static"},
        ],
        "catalog": {
            "ZoneTempSensor": {"canonical_unit": "degC", "operating_range": [10, 35],
                               "system": "zones", "device_clazz": "ZoneTempSensor"},
            "ChilledSupplyTemp": {"canonical_unit": "degC", "operating_range": [4, 15],
                                  "system": "hvac", "device_clazz": "Chiller"},
            "ChilledReturnTemp": {"canonical_unit": "degC", "operating_range": [4, 25],
                                  "system": "hvac", "device_clazz": "Chiller"},
            "ChilledSetpoint": {"canonical_unit": "degC", "operating_range": [4, 15],
                                "system": "hvac", "device_clazz": "Chiller"},
            "HotSupplyTemp": {"canonical_unit": "degC", "operating_range": [30, 90],
                              "system": "hvac", "device_clazz": "Boiler"},
            "HotSetpoint": {"canonical_unit": "degC", "operating_range": [30, 90],
                            "system": "hvac", "device_clazz": "Boiler"},
            "EquipmentPowerMeter": {"canonical_unit": "kW", "operating_range": [0, 300],
                                    "system": "power", "device_clazz": "GenericEquipment"},
            "BuildingPowerMeter": {"canonical_unit": "kW", "operating_range": [0, 500],
                                   "system": "power", "device_clazz": "BuildingMeter"},
            "ShadePosition": {"canonical_unit": "frac", "operating_range": [0, 1],
                              "system": "shading", "device_clazz": "ShadingSystem"},
            "MainsVoltage": {"canonical_unit": "V", "operating_range": [207, 253],
                             "system": "power", "device_clazz": "PowerSupply"},
            "RunStatus": {"canonical_unit": "bool", "operating_range": [0, 1],
                          "system": "power", "device_clazz": "BackupGenerator"},
        },
    }


def default_classifier(*, min_samples: int = 1) -> RuleTableClassifier:
    return RuleTableClassifier.from_doc(
        default_classification_doc(), min_samples=min_samples
    )
