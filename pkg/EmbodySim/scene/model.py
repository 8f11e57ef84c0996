"""Object-centric scene value types and their canonical JSON form."""

import json
import math
from dataclasses import dataclass, replace
from typing import Any, Dict, List, Optional, Sequence, Tuple

from .catalog import Catalog, MaterialProfile, load_catalog

Vec3 = Tuple[float, float, float]


@dataclass(frozen=True)
class Box:
    """Axis-aligned box given by center and half extents (meters)."""

    center: Vec3
    half: Vec3

    @property
    def low(self) -> Vec3:
        return tuple(c - h for c, h in zip(self.center, self.half))

    @property
    def high(self) -> Vec3:
        return tuple(c + h for c, h in zip(self.center, self.half))

    @property
    def volume(self) -> float:
        return 8.0 * self.half[0] * self.half[1] * self.half[2]

    def contains_box(self, other: "Box", tol: float = 1e-9) -> bool:
        return all(
            lo - tol <= olo and ohi <= hi + tol
            for lo, hi, olo, ohi in zip(self.low, self.high, other.low, other.high)
        )

    def contains_point(self, point: Sequence[float], tol: float = 1e-9) -> bool:
        return all(
            lo - tol <= p <= hi + tol for lo, hi, p in zip(self.low, self.high, point)
        )

    def closest_point(self, point: Sequence[float]) -> Vec3:
        return tuple(
            min(max(p, lo), hi) for p, lo, hi in zip(point, self.low, self.high)
        )

    def distance_to(self, point: Sequence[float]) -> float:
        closest = self.closest_point(point)
        return math.dist(closest, point)

    def moved_to(self, center: Sequence[float]) -> "Box":
        return Box(center=tuple(float(c) for c in center), half=self.half)


def overlap_volume(a: Box, b: Box) -> float:
    """Volume of the intersection of two boxes."""
    volume = 1.0
    for alo, ahi, blo, bhi in zip(a.low, a.high, b.low, b.high):
        side = min(ahi, bhi) - max(alo, blo)
        if side <= 0:
            return 0.0
        volume *= side
    return volume


@dataclass(frozen=True)
class AmbientSoundTag:
    """A continuously emitted sound attached to an object."""

    ontology_id: str
    description: str


@dataclass(frozen=True)
class ObjectInstance:
    """One object in a scene."""

    id: int
    category: str
    bbox: Box
    material: MaterialProfile
    temp_label: str
    temp_celsius: float
    seed: int
    ambient_sound: Optional[AmbientSoundTag] = None
    portable: bool = True
    added: bool = False

    @property
    def visual_key(self) -> Tuple[str, Vec3]:
        """Attributes visible without interaction."""
        return (self.category, self.bbox.half)


@dataclass(frozen=True)
class TwinGroup:
    """Objects that look identical and differ only in ``varied``."""

    ids: Tuple[int, ...]
    varied: str


@dataclass(frozen=True)
class Scene:
    """An indoor scene: room box plus objects with dense ids 0..O-1."""

    id: str
    room_extents: Box
    objects: Tuple[ObjectInstance, ...]
    n_base: int
    n_added: int
    twin_groups: Tuple[TwinGroup, ...] = ()

    def object(self, object_id: int) -> ObjectInstance:
        if not 0 <= object_id < len(self.objects):
            raise KeyError(object_id)
        return self.objects[object_id]

    def with_object(self, obj: ObjectInstance) -> "Scene":
        objects = list(self.objects)
        objects[obj.id] = obj
        return replace(self, objects=tuple(objects))

    @property
    def sounding_objects(self) -> List[ObjectInstance]:
        return [o for o in self.objects if o.ambient_sound is not None]


@dataclass(frozen=True)
class SceneConfig:
    """Parameters for ``sample_scene``."""

    room_half_extents: Vec3 = (3.0, 2.5, 1.5)
    n_base: int = 8
    n_added: int = 3
    max_retries: int = 200
    max_overlap: float = 0.05
    ambient_probability: float = 0.35

    @classmethod
    def from_dict(cls, values: Dict[str, Any]) -> "SceneConfig":
        known = {k: v for k, v in values.items() if k in cls.__dataclass_fields__}
        if "room_half_extents" in known:
            known["room_half_extents"] = tuple(
                float(v) for v in known["room_half_extents"]
            )
        return cls(**known)

    @property
    def room(self) -> Box:
        return Box(center=self.room_half_extents, half=self.room_half_extents)


def _box_to_dict(box: Box) -> Dict[str, List[float]]:
    return {"center": list(box.center), "half": list(box.half)}


def _box_from_dict(raw: Dict[str, List[float]]) -> Box:
    return Box(
        center=tuple(float(v) for v in raw["center"]),
        half=tuple(float(v) for v in raw["half"]),
    )


def scene_to_dict(scene: Scene) -> Dict[str, Any]:
    """Plain-data form of a scene; materials are referenced by name."""
    return {
        "id": scene.id,
        "room_extents": _box_to_dict(scene.room_extents),
        "n_base": scene.n_base,
        "n_added": scene.n_added,
        "twin_groups": [
            {"ids": list(g.ids), "varied": g.varied} for g in scene.twin_groups
        ],
        "objects": [
            {
                "id": o.id,
                "category": o.category,
                "bbox": _box_to_dict(o.bbox),
                "material": o.material.name,
                "temp_label": o.temp_label,
                "temp_celsius": o.temp_celsius,
                "seed": o.seed,
                "ambient_sound": (
                    None
                    if o.ambient_sound is None
                    else {
                        "ontology_id": o.ambient_sound.ontology_id,
                        "description": o.ambient_sound.description,
                    }
                ),
                "portable": o.portable,
                "added": o.added,
            }
            for o in scene.objects
        ],
    }


def scene_from_dict(raw: Dict[str, Any], catalog: Optional[Catalog] = None) -> Scene:
    """Inverse of ``scene_to_dict``."""
    catalog = catalog or load_catalog()
    objects = []
    for o in raw["objects"]:
        ambient = o.get("ambient_sound")
        objects.append(
            ObjectInstance(
                id=int(o["id"]),
                category=o["category"],
                bbox=_box_from_dict(o["bbox"]),
                material=catalog.material(o["material"]),
                temp_label=o["temp_label"],
                temp_celsius=float(o["temp_celsius"]),
                seed=int(o["seed"]),
                ambient_sound=None if ambient is None else AmbientSoundTag(**ambient),
                portable=bool(o.get("portable", True)),
                added=bool(o.get("added", False)),
            )
        )
    return Scene(
        id=raw["id"],
        room_extents=_box_from_dict(raw["room_extents"]),
        objects=tuple(objects),
        n_base=int(raw["n_base"]),
        n_added=int(raw["n_added"]),
        twin_groups=tuple(
            TwinGroup(ids=tuple(int(i) for i in g["ids"]), varied=g["varied"])
            for g in raw.get("twin_groups", [])
        ),
    )


def scene_to_json(scene: Scene) -> str:
    """Canonical serialization: one JSON document, sorted keys, no spaces."""
    return json.dumps(scene_to_dict(scene), sort_keys=True, separators=(",", ":"))


def scene_from_json(text: str, catalog: Optional[Catalog] = None) -> Scene:
    return scene_from_dict(json.loads(text), catalog)
