"""Static ambient-sound ontology and object-to-sound assignment."""

import logging
from dataclasses import dataclass
from functools import lru_cache
from pathlib import Path
from typing import Dict, List, Optional, Tuple, Union

import yaml

from ..errors import CatalogError
from ..scene.catalog import DATA_DIR
from ..scene.model import AmbientSoundTag
from ..utils.seeding import rng_for

logger = logging.getLogger("EmbodySim.sensors")

DEFAULT_ONTOLOGY_PATH = DATA_DIR / "ambient.yaml"

__all__ = [
    "AmbientEntry",
    "AmbientOntology",
    "AmbientSoundTag",
    "assign_ambient",
    "load_ontology",
]


@dataclass(frozen=True)
class AmbientEntry:
    ontology_id: str
    description: str
    categories: Tuple[str, ...]

    @property
    def tag(self) -> AmbientSoundTag:
        return AmbientSoundTag(
            ontology_id=self.ontology_id, description=self.description
        )


@dataclass(frozen=True)
class AmbientOntology:
    """Sound description to compatible-category table."""

    version: int
    entries: Tuple[AmbientEntry, ...]

    def for_category(self, category: str) -> List[AmbientEntry]:
        return [e for e in self.entries if category in e.categories]

    def get(self, ontology_id: str) -> Optional[AmbientEntry]:
        for entry in self.entries:
            if entry.ontology_id == ontology_id:
                return entry
        return None

    def __contains__(self, ontology_id: str) -> bool:
        return self.get(ontology_id) is not None


def parse_ontology(raw: Dict[str, object]) -> AmbientOntology:
    try:
        entries = tuple(
            AmbientEntry(
                ontology_id=row["ontology_id"],
                description=row["description"],
                categories=tuple(row["categories"]),
            )
            for row in raw["sounds"]
        )
    except (KeyError, TypeError) as e:
        raise CatalogError(f"Malformed ambient ontology: {e}") from e
    ids = [e.ontology_id for e in entries]
    if len(set(ids)) != len(ids):
        raise CatalogError("Ambient ontology ids must be unique")
    return AmbientOntology(version=int(raw.get("version", 1)), entries=entries)


def load_ontology(path: Optional[Union[str, Path]] = None) -> AmbientOntology:
    """Load the ambient ontology; the built-in table is cached."""
    if path is None:
        return _builtin_ontology()
    with open(path, "r") as f:
        ontology = parse_ontology(yaml.safe_load(f))
    logger.info(f"Loaded {len(ontology.entries)} ambient sounds from {path}")
    return ontology


@lru_cache(maxsize=1)
def _builtin_ontology() -> AmbientOntology:
    with open(DEFAULT_ONTOLOGY_PATH, "r") as f:
        return parse_ontology(yaml.safe_load(f))


def assign_ambient(
    obj, ontology: Optional[AmbientOntology] = None, seed: int = 0
) -> Optional[AmbientSoundTag]:
    """Pick a sound the object's category can make, or None if the table has none.

    Args:
        obj: Anything with a ``category`` attribute
        ontology: Sound table (built-in if omitted)
        seed: Selects among compatible rows

    Returns:
        AmbientSoundTag or None
    """
    ontology = ontology or load_ontology()
    candidates = ontology.for_category(obj.category)
    if not candidates:
        return None
    index = int(rng_for("ambient", obj.category, seed).integers(len(candidates)))
    return candidates[index].tag
