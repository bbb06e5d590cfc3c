"""Device registry: the authoritative map from devices and points to their
classifications, ranges, and active baselines.

The registry is a snapshot-persisted document (atomic rewrite on every
change) so a restart recovers it completely. Point ownership is exclusive:

* no two devices may claim the same point_id;
* every point referenced by a state vector resolves to exactly one device.

It also serves as the stream engine's registry view (`lookup` +
`point_views`).
"""

from __future__ import annotations

import threading
from pathlib import Path

from autobas.errors import ConflictError, NotFoundError
from autobas.knowledge._files import atomic_write_json, read_json
from autobas.knowledge.records import DeviceRecord, PointRecord
from autobas.pipeline import PointView

REGISTRY_FILE = "devices.json"


def _seed_mean(p: PointRecord) -> float:
    """Imputation seed for a point: its baseline mean, or the operating-range
    midpoint before any baseline has been captured."""

    if p.baseline is not None:
        return p.baseline.mean
    return (p.operating_range.lo + p.operating_range.hi) / 2.0

class DeviceRegistry:
    def __init__(self, root: Path):
        self.root = Path(root)
        self.root.mkdir(parents=True, exist_ok=True)
        self._lock = threading.RLock()
        self._devices: dict[str, DeviceRecord] = {}
        self._point_owner: dict[str, str] = {}
        self._version = 0
        self._load()

    def _load(self) -> None:
        doc = read_json(self.root / REGISTRY_FILE)
        if doc is None:
            return
        self._version = int(doc["version"])
        for rec_doc in doc["devices"]:
            rec = DeviceRecord.from_dict(rec_doc)
            self._devices[rec.device_id] = rec
            for p in rec.points:
                self._point_owner[p.point_id] = rec.device_id

    def _persist(self) -> None:
        atomic_write_json(
            self.root / REGISTRY_FILE,
            {
                "version": self._version,
                "devices": [
                    self._devices[d].to_dict() for d in sorted(self._devices)
                ],
            },
        )

    # ------------------------------------------------------------------

    @property
    def version(self) -> int:
        return self._version

    def count(self) -> int:
        return len(self._devices)

    def register(self, rec: DeviceRecord) -> None:
        """Register a new device; conflicts on duplicate device_id or on a
        point already owned by another device."""

        with self._lock:
            if rec.device_id in self._devices:
                raise ConflictError(
                    f"device {rec.device_id!r} already registered; "
                    "use update() to change it"
                )
            for p in rec.points:
                owner = self._point_owner.get(p.point_id)
                if owner is not None:
                    raise ConflictError(
                        f"point {p.point_id!r} already owned by device {owner!r}"
                    )
            self._devices[rec.device_id] = rec
            for p in rec.points:
                self._point_owner[p.point_id] = rec.device_id
            self._version += 1
            self._persist()

    def update(self, rec: DeviceRecord) -> None:
        """Replace an existing device's record; point ownership may change
        but never overlap another device."""

        with self._lock:
            if rec.device_id not in self._devices:
                raise NotFoundError(f"device {rec.device_id!r} is not registered")
            for p in rec.points:
                owner = self._point_owner.get(p.point_id)
                if owner is not None and owner != rec.device_id:
                    raise ConflictError(
                        f"point {p.point_id!r} already owned by device {owner!r}"
                    )
            old = self._devices[rec.device_id]
            for p in old.points:
                self._point_owner.pop(p.point_id, None)
            self._devices[rec.device_id] = rec
            for p in rec.points:
                self._point_owner[p.point_id] = rec.device_id
            self._version += 1
            self._persist()

    def deregister(self, device_id: str) -> None:
        with self._lock:
            rec = self._devices.pop(device_id, None)
            if rec is None:
                raise NotFoundError(f"device {device_id!r} is not registered")
            for p in rec.points:
                self._point_owner.pop(p.point_id, None)
            self._version += 1
            self._persist()

    # ------------------------------------------------------------------
    # queries
    # ------------------------------------------------------------------

    def get(self, device_id: str) -> DeviceRecord:
        with self._lock:
            rec = self._devices.get(device_id)
            if rec is None:
                raise NotFoundError(f"device {device_id!r} is not registered")
            return rec

    def devices(self) -> list[DeviceRecord]:
        with self._lock:
            return [self._devices[d] for d in sorted(self._devices)]

    def has_point(self, point_id: str) -> bool:
        with self._lock:
            return point_id in self._point_owner

    def owner_of(self, point_id: str) -> DeviceRecord:
        with self._lock:
            device_id = self._point_owner.get(point_id)
            if device_id is None:
                raise NotFoundError(f"point {point_id!r} is not registered")
            return self._devices[device_id]

    def point_record(self, point_id: str):
        return self.owner_of(point_id).point(point_id)

    # ------------------------------------------------------------------
    # stream-engine view
    # ------------------------------------------------------------------

    def lookup(self, device_id: str, point_id: str) -> PointView | None:
        with self._lock:
            rec = self._devices.get(device_id)
            if rec is None:
                return None
            p = rec.point(point_id)
            if p is None:
                return None
            return PointView(
                device_id=device_id,
                point_id=point_id,
                unit=p.unit,
                baseline_mean=_seed_mean(p),
            )

    def point_views(self) -> list[PointView]:
        with self._lock:
            views = [
                PointView(
                    device_id=rec.device_id,
                    point_id=p.point_id,
                    unit=p.unit,
                    baseline_mean=_seed_mean(p),
                )
                for rec in self._devices.values()
                for p in rec.points
            ]
        return sorted(views, key=lambda v: v.point_id)
