"""Injection of visually identical distractor objects ("twins")."""

import logging
from dataclasses import replace
from typing import List, Optional

import numpy as np

from ..errors import TwinInjectionError
from ..sensors.thermal import sample_temperature
from ..utils.seeding import derive_seed, rng_for
from .catalog import Catalog, CategorySpec, load_catalog
from .model import Box, ObjectInstance, Scene, SceneConfig, TwinGroup
from .sampler import MAX_ADDED, place_box

logger = logging.getLogger("EmbodySim.scene")

VARIED_ATTRIBUTES = ("material", "temp_label", "hardness")


def available_values(spec: CategorySpec, varied: str) -> int:
    """How many distinct values of ``varied`` a category admits."""
    if varied in ("material", "hardness"):
        return len(spec.materials)
    if varied == "temp_label":
        return len(spec.temp_labels)
    raise TwinInjectionError(f"Unknown varied attribute: {varied}")


def _twin_values(
    spec: CategorySpec, varied: str, k: int, rng: np.random.Generator, catalog: Catalog
) -> List[str]:
    if varied == "material":
        order = rng.permutation(len(spec.materials))[:k]
        return [spec.materials[i] for i in order]
    if varied == "hardness":
        ordered = sorted(spec.materials, key=lambda m: catalog.material(m).hardness)
        picks = np.round(np.linspace(0, len(ordered) - 1, k)).astype(int)
        return [ordered[i] for i in picks]
    order = rng.permutation(len(spec.temp_labels))[:k]
    return [spec.temp_labels[i] for i in order]


def _pick_template(
    scene: Scene,
    k: int,
    varied: str,
    catalog: Catalog,
    template_id: Optional[int],
) -> ObjectInstance:
    grouped = {i for g in scene.twin_groups for i in g.ids}
    if template_id is not None:
        template = scene.object(template_id)
        if template.id in grouped:
            raise TwinInjectionError(f"object {template_id} is already a twin")
        have = available_values(catalog.category(template.category), varied)
        if k > have:
            raise TwinInjectionError(
                f"k={k} exceeds the {have} distinct {varied} values of "
                f"{template.category}"
            )
        return template

    best = 0
    for obj in scene.objects:
        if not obj.added or not obj.portable or obj.id in grouped:
            continue
        have = available_values(catalog.category(obj.category), varied)
        best = max(best, have)
        if have >= k:
            return obj
    raise TwinInjectionError(
        f"k={k} exceeds the available distinct {varied} values "
        f"(at most {best} for any inserted object)"
    )


def twin_injection(
    scene: Scene,
    k: int,
    varied: str,
    seed: int,
    catalog: Optional[Catalog] = None,
    config: Optional[SceneConfig] = None,
    template_id: Optional[int] = None,
) -> Scene:
    """Turn one inserted object into ``k`` twins differing only in ``varied``.

    The template keeps its id and takes the first value; the other k-1 twins
    are appended with fresh ids. Twins share category, half extents, seed and
    ambient sound.

    Args:
        scene: A valid scene
        k: Number of twins (at least 2)
        varied: material, temp_label or hardness
        seed: Seed for value choice and placement
        catalog: Catalog (built-in if omitted)
        config: Placement parameters (defaults if omitted)
        template_id: Force a specific template object

    Returns:
        A new Scene with a TwinGroup appended to ``twin_groups``

    Raises:
        TwinInjectionError: k < 2, too few distinct values, no template, or the
            result would exceed the inserted-object limit
    """
    if k < 2:
        raise TwinInjectionError(f"k must be >= 2 for disambiguation, got {k}")
    if varied not in VARIED_ATTRIBUTES:
        raise TwinInjectionError(f"Unknown varied attribute: {varied}")
    n_added = scene.n_added + k - 1
    if n_added > MAX_ADDED:
        raise TwinInjectionError(
            f"{k} twins would raise n_added to {n_added} (max {MAX_ADDED})"
        )
    catalog = catalog or load_catalog()
    config = config or SceneConfig()

    template = _pick_template(scene, k, varied, catalog, template_id)
    spec = catalog.category(template.category)
    rng = rng_for("twins", seed, varied, template.id)
    values = _twin_values(spec, varied, k, rng, catalog)

    placed: List[Box] = [o.bbox for o in scene.objects]
    twins: List[ObjectInstance] = []
    for j, value in enumerate(values):
        if varied == "temp_label":
            reading = sample_temperature(value, derive_seed(seed, "twin", j), catalog)
            twin = replace(template, temp_label=value, temp_celsius=reading.celsius)
        else:
            twin = replace(template, material=catalog.material(value))
        if j > 0:
            bbox = place_box(
                template.bbox.half,
                scene.room_extents,
                placed,
                rng,
                config.max_retries,
                config.max_overlap,
            )
            if bbox is None:
                raise TwinInjectionError(
                    f"could not place twin {j} of {template.category} after "
                    f"{config.max_retries} attempts"
                )
            placed.append(bbox)
            twin = replace(twin, id=len(scene.objects) + j - 1, bbox=bbox, added=True)
        twins.append(twin)

    objects = list(scene.objects)
    objects[template.id] = twins[0]
    objects.extend(twins[1:])
    group = TwinGroup(ids=tuple(t.id for t in twins), varied=varied)
    logger.debug(
        f"Injected {k} {template.category} twins varying {varied} into {scene.id}: "
        f"{values}"
    )
    return replace(
        scene,
        objects=tuple(objects),
        n_added=scene.n_added + k - 1,
        twin_groups=scene.twin_groups + (group,),
    )
