"""Scene invariant checker. Reports violations; never raises."""

import logging
import math
from dataclasses import dataclass, field
from typing import List, Optional, Tuple

from ..sensors.ambient import load_ontology
from .catalog import Catalog, load_catalog
from .model import Scene, overlap_volume
from .sampler import MAX_ADDED

logger = logging.getLogger("EmbodySim.scene")

MAX_OVERLAP_FRACTION = 0.05


@dataclass(frozen=True)
class Violation:
    rule: str
    object_ids: Tuple[int, ...]
    message: str

    def __str__(self) -> str:
        ids = ",".join(str(i) for i in self.object_ids)
        return f"[{self.rule}] ids=({ids}) {self.message}"


@dataclass
class ValidationReport:
    scene_id: str
    violations: List[Violation] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.violations

    def add(self, rule: str, ids, message: str):
        self.violations.append(Violation(rule, tuple(ids), message))

    def rules(self) -> List[str]:
        return [v.rule for v in self.violations]


def _check_objects(scene: Scene, catalog: Catalog, report: ValidationReport):
    ontology = load_ontology()
    for obj in scene.objects:
        half = obj.bbox.half
        if not all(math.isfinite(v) for v in (*obj.bbox.center, *half)):
            report.add("finite", [obj.id], "bbox has non-finite values")
            continue
        if any(h <= 0 for h in half):
            report.add("half_extents", [obj.id], f"half extents {half} not positive")
        if not scene.room_extents.contains_box(obj.bbox):
            report.add("inside_room", [obj.id], "bbox extends outside the room")
        try:
            if catalog.material(obj.material.name) != obj.material:
                report.add(
                    "material", [obj.id], f"{obj.material.name} differs from catalog"
                )
        except Exception:
            report.add("material", [obj.id], f"unknown material {obj.material.name}")
        try:
            low, high = catalog.temp_range(obj.temp_label)
            if not low <= obj.temp_celsius <= high:
                report.add(
                    "temp_range",
                    [obj.id],
                    f"{obj.temp_celsius:.2f} C outside {obj.temp_label} "
                    f"[{low}, {high}]",
                )
        except Exception:
            report.add("temp_range", [obj.id], f"unknown label {obj.temp_label}")
        sound = obj.ambient_sound
        if sound is not None and sound.ontology_id not in ontology:
            report.add(
                "ambient",
                [obj.id],
                f"ontology id {obj.ambient_sound.ontology_id} not in table",
            )


def _check_overlaps(scene: Scene, report: ValidationReport):
    objects = scene.objects
    for i, a in enumerate(objects):
        for b in objects[i + 1 :]:
            limit = MAX_OVERLAP_FRACTION * min(a.bbox.volume, b.bbox.volume)
            shared = overlap_volume(a.bbox, b.bbox)
            if shared > limit + 1e-12:
                report.add(
                    "overlap",
                    [a.id, b.id],
                    f"overlap {shared:.3g} m^3 exceeds 5% of the smaller box",
                )


def _check_twins(scene: Scene, catalog: Catalog, report: ValidationReport):
    count = len(scene.objects)
    for group in scene.twin_groups:
        if any(not 0 <= i < count for i in group.ids) or len(group.ids) < 2:
            report.add("twins", group.ids, "twin group references unknown objects")
            continue
        twins = [scene.objects[i] for i in group.ids]
        if len({t.visual_key for t in twins}) != 1:
            report.add("twins", group.ids, "twins are visually distinguishable")
        if group.varied == "temp_label":
            values = [t.temp_label for t in twins]
        else:
            values = [t.material.name for t in twins]
        if len(set(values)) != len(values):
            report.add("twins", group.ids, f"twins repeat a {group.varied} value")


def validate_scene(scene: Scene, catalog: Optional[Catalog] = None) -> ValidationReport:
    """List every violated scene invariant with the ids involved.

    Args:
        scene: Scene to check
        catalog: Catalog to check materials and ranges against

    Returns:
        ValidationReport; ``report.ok`` iff the scene is valid
    """
    report = ValidationReport(scene_id=getattr(scene, "id", "?"))
    try:
        catalog = catalog or load_catalog()
        if not 1 <= scene.n_added <= MAX_ADDED:
            report.add("n_added", [], f"n_added={scene.n_added} outside 1..{MAX_ADDED}")
        if scene.n_base + scene.n_added != len(scene.objects):
            report.add(
                "counts",
                [],
                f"n_base+n_added={scene.n_base + scene.n_added} but "
                f"{len(scene.objects)} objects",
            )
        bad_ids = [o.id for i, o in enumerate(scene.objects) if o.id != i]
        if bad_ids:
            report.add("dense_ids", bad_ids, "object ids must be dense 0..O-1")
        _check_objects(scene, catalog, report)
        _check_overlaps(scene, report)
        _check_twins(scene, catalog, report)
    except Exception as e:
        logger.error(f"Scene validation aborted: {e}", exc_info=True)
        report.add("malformed", [], f"scene could not be inspected: {e}")
    return report
