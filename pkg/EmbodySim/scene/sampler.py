"""Seeded scene sampling with rejection placement."""

import logging
from dataclasses import replace
from typing import List, Optional, Sequence

import numpy as np

from ..errors import CatalogError, PlacementError, SceneValidationError
from ..sensors.ambient import assign_ambient, load_ontology
from ..sensors.thermal import sample_temperature
from ..utils.seeding import MASK64, derive_seed, rng_for
from .catalog import Catalog, CategorySpec
from .model import Box, ObjectInstance, Scene, SceneConfig, overlap_volume

logger = logging.getLogger("EmbodySim.scene")

MAX_ADDED = 10


def check_scene_config(config: SceneConfig):
    """Raise SceneValidationError for configs that cannot produce a valid scene."""
    if not 1 <= config.n_added <= MAX_ADDED:
        raise SceneValidationError(
            f"n_added must be in 1..{MAX_ADDED}, got {config.n_added}"
        )
    if config.n_base < 0:
        raise SceneValidationError(f"n_base must be >= 0, got {config.n_base}")
    if any(not h > 0 for h in config.room_half_extents):
        raise SceneValidationError("room extents must be positive")
    if config.max_retries < 1:
        raise SceneValidationError("max_retries must be >= 1")


def place_box(
    half: Sequence[float],
    room: Box,
    placed: List[Box],
    rng: np.random.Generator,
    max_retries: int,
    max_overlap: float,
) -> Optional[Box]:
    """Rejection-sample a floor position for a box of the given half extents.

    Returns:
        The placed Box, or None after ``max_retries`` rejected attempts
    """
    half = tuple(float(h) for h in half)
    low, high = room.low, room.high
    if any(2 * h > hi - lo for h, lo, hi in zip(half, low, high)):
        return None
    for _ in range(max_retries):
        x = rng.uniform(low[0] + half[0], high[0] - half[0])
        y = rng.uniform(low[1] + half[1], high[1] - half[1])
        candidate = Box(center=(float(x), float(y), low[2] + half[2]), half=half)
        if all(
            overlap_volume(candidate, other)
            <= max_overlap * min(candidate.volume, other.volume)
            for other in placed
        ):
            return candidate
    return None


def _sample_half(spec: CategorySpec, rng: np.random.Generator) -> tuple:
    return tuple(float(rng.uniform(lo, hi)) for lo, hi in spec.half_extent_ranges)


def sample_scene(catalog: Catalog, config: SceneConfig, seed: int) -> Scene:
    """Sample a scene of ``n_base`` pre-existing and ``n_added`` inserted objects.

    Base objects come from every category; inserted objects only from portable
    ones. Every object rests on the floor.

    Args:
        catalog: Object catalog
        config: Scene parameters
        seed: Explicit integer seed

    Returns:
        A Scene satisfying every scene invariant

    Raises:
        SceneValidationError: The config is invalid (checked before sampling)
        PlacementError: An object could not be placed within ``max_retries``
    """
    check_scene_config(config)
    if not catalog.categories:
        raise CatalogError("Catalog has no categories")
    portable = [c for c in catalog.categories if c.portable]
    if not portable:
        raise CatalogError("Catalog has no portable categories for added objects")

    ontology = load_ontology()
    room = config.room
    rng = rng_for("scene", seed)
    placed: List[Box] = []
    objects: List[ObjectInstance] = []

    for i in range(config.n_base + config.n_added):
        added = i >= config.n_base
        pool = portable if added else catalog.categories
        spec = pool[int(rng.integers(len(pool)))]
        half = _sample_half(spec, rng)
        bbox = place_box(
            half, room, placed, rng, config.max_retries, config.max_overlap
        )
        if bbox is None:
            logger.warning(
                f"Placement failed for object {i} ({spec.name}), seed={seed}"
            )
            raise PlacementError(
                f"could not place object {i} ({spec.name}) after "
                f"{config.max_retries} attempts"
            )
        placed.append(bbox)

        material_name = spec.materials[int(rng.integers(len(spec.materials)))]
        material = catalog.material(material_name)
        temp_label = spec.temp_labels[int(rng.integers(len(spec.temp_labels)))]
        object_seed = derive_seed(seed, "object", i)
        reading = sample_temperature(temp_label, object_seed, catalog)
        obj = ObjectInstance(
            id=i,
            category=spec.name,
            bbox=bbox,
            material=material,
            temp_label=temp_label,
            temp_celsius=reading.celsius,
            seed=object_seed,
            portable=spec.portable,
            added=added,
        )
        if rng.random() < config.ambient_probability:
            tag = assign_ambient(obj, ontology, object_seed)
            if tag is not None:
                obj = replace(obj, ambient_sound=tag)
        objects.append(obj)

    scene = Scene(
        id=f"scene-{seed & MASK64:016x}",
        room_extents=room,
        objects=tuple(objects),
        n_base=config.n_base,
        n_added=config.n_added,
    )
    logger.debug(f"Sampled {scene.id} with {len(objects)} objects")
    return scene
