"""Material table and object catalog loading."""

import hashlib
import json
import logging
import math
from dataclasses import dataclass
from functools import lru_cache
from pathlib import Path
from typing import Dict, List, Optional, Tuple, Union

import yaml

from ..errors import CatalogError

logger = logging.getLogger("EmbodySim.catalog")

DATA_DIR = Path(__file__).resolve().parent.parent / "data"
DEFAULT_CATALOG_PATH = DATA_DIR / "catalog.yaml"

MATERIAL_NAMES = ("ceramic", "plastic", "steel", "wood", "glass", "paper", "fabric")
TEMP_LABELS = ("hot", "cold", "room")


@dataclass(frozen=True)
class MaterialProfile:
    """Physical and perceptual properties of one material."""

    name: str
    hardness: float
    elasticity: float
    deformability: float
    modal_base_freq_hz: float
    modal_damping: float
    density_rel: float
    hardness_word: str

    def to_dict(self) -> Dict[str, object]:
        return {
            "name": self.name,
            "hardness": self.hardness,
            "elasticity": self.elasticity,
            "deformability": self.deformability,
            "modal_base_freq_hz": self.modal_base_freq_hz,
            "modal_damping": self.modal_damping,
            "density_rel": self.density_rel,
            "hardness_word": self.hardness_word,
        }


@dataclass(frozen=True)
class CategorySpec:
    """How objects of one category are sampled."""

    name: str
    portable: bool
    half_extent_ranges: Tuple[Tuple[float, float], ...]
    materials: Tuple[str, ...]
    temp_labels: Tuple[str, ...]


@dataclass(frozen=True)
class Catalog:
    """Versioned material table plus object categories."""

    version: int
    materials: Tuple[MaterialProfile, ...]
    categories: Tuple[CategorySpec, ...]
    temperature_ranges: Tuple[Tuple[str, float, float], ...]

    def material(self, name: str) -> MaterialProfile:
        for material in self.materials:
            if material.name == name:
                return material
        raise CatalogError(f"Unknown material: {name}")

    def category(self, name: str) -> CategorySpec:
        for category in self.categories:
            if category.name == name:
                return category
        raise CatalogError(f"Unknown category: {name}")

    def temp_range(self, label: str) -> Tuple[float, float]:
        for name, low, high in self.temperature_ranges:
            if name == label:
                return low, high
        raise CatalogError(f"Unknown temperature label: {label}")

    def materials_by_hardness(self) -> List[MaterialProfile]:
        return sorted(self.materials, key=lambda m: m.hardness)

    def category_names(self) -> List[str]:
        return [c.name for c in self.categories]

    def to_dict(self) -> Dict[str, object]:
        return {
            "version": self.version,
            "temperature_ranges": {
                name: [low, high] for name, low, high in self.temperature_ranges
            },
            "materials": [m.to_dict() for m in self.materials],
            "categories": [
                {
                    "name": c.name,
                    "portable": c.portable,
                    "half_extents": [list(r) for r in c.half_extent_ranges],
                    "materials": list(c.materials),
                    "temp_labels": list(c.temp_labels),
                }
                for c in self.categories
            ],
        }


def catalog_hash(catalog: Catalog) -> str:
    """SHA-256 over the canonical JSON form of the catalog."""
    canonical = json.dumps(catalog.to_dict(), sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canonical.encode("utf-8")).hexdigest()


def _check_materials(materials: List[MaterialProfile]):
    names = [m.name for m in materials]
    if len(set(names)) != len(names):
        raise CatalogError("Material names must be unique")
    for m in materials:
        if m.name not in MATERIAL_NAMES:
            raise CatalogError(f"Material {m.name} is not a known material name")
        scalars = (
            m.hardness,
            m.elasticity,
            m.deformability,
            m.modal_base_freq_hz,
            m.modal_damping,
            m.density_rel,
        )
        if not all(math.isfinite(v) for v in scalars):
            raise CatalogError(f"Material {m.name} has non-finite values")
        if not (0.0 < m.hardness <= 1.0 and 0.0 < m.elasticity <= 1.0):
            raise CatalogError(f"Material {m.name}: hardness/elasticity out of (0,1]")
        if not 0.0 <= m.deformability < 1.0:
            raise CatalogError(f"Material {m.name}: deformability out of [0,1)")
    ordered = sorted(materials, key=lambda m: m.hardness)
    for softer, harder in zip(ordered, ordered[1:]):
        if not harder.deformability < softer.deformability:
            raise CatalogError(
                f"Deformability must strictly decrease with hardness "
                f"({softer.name} -> {harder.name})"
            )
    words = [m.hardness_word for m in materials]
    if len(set(words)) != len(words):
        raise CatalogError("Hardness words must be unique")


def parse_catalog(raw: Dict[str, object]) -> Catalog:
    """Build a Catalog from its YAML structure, validating every invariant."""
    try:
        materials = [MaterialProfile(**m) for m in raw["materials"]]
        _check_materials(materials)
        known = {m.name for m in materials}

        categories = []
        for c in raw["categories"]:
            ranges = tuple((float(lo), float(hi)) for lo, hi in c["half_extents"])
            if len(ranges) != 3 or any(not 0 < lo <= hi for lo, hi in ranges):
                raise CatalogError(f"Category {c['name']}: bad half extent ranges")
            unknown = set(c["materials"]) - known
            if unknown:
                raise CatalogError(f"Category {c['name']}: unknown materials {unknown}")
            if not set(c["temp_labels"]) <= set(TEMP_LABELS) or not c["temp_labels"]:
                raise CatalogError(f"Category {c['name']}: bad temperature labels")
            categories.append(
                CategorySpec(
                    name=c["name"],
                    portable=bool(c["portable"]),
                    half_extent_ranges=ranges,
                    materials=tuple(c["materials"]),
                    temp_labels=tuple(c["temp_labels"]),
                )
            )
        if not categories:
            raise CatalogError("Catalog has no categories")

        ranges = raw["temperature_ranges"]
        temperature_ranges = tuple(
            (label, float(ranges[label][0]), float(ranges[label][1]))
            for label in TEMP_LABELS
        )
        return Catalog(
            version=int(raw["version"]),
            materials=tuple(materials),
            categories=tuple(categories),
            temperature_ranges=temperature_ranges,
        )
    except CatalogError:
        raise
    except (KeyError, TypeError, ValueError) as e:
        raise CatalogError(f"Malformed catalog: {e}") from e


def load_catalog(path: Optional[Union[str, Path]] = None) -> Catalog:
    """Load a catalog file; the built-in catalog is cached."""
    if path is None:
        return _builtin_catalog()
    with open(path, "r") as f:
        raw = yaml.safe_load(f)
    catalog = parse_catalog(raw)
    logger.info(f"Loaded catalog v{catalog.version} from {path}")
    return catalog


@lru_cache(maxsize=1)
def _builtin_catalog() -> Catalog:
    with open(DEFAULT_CATALOG_PATH, "r") as f:
        return parse_catalog(yaml.safe_load(f))


def label_for_celsius(
    celsius: float, catalog: Optional[Catalog] = None
) -> Optional[str]:
    """The temperature label whose range contains ``celsius``, if any."""
    catalog = catalog or load_catalog()
    for label, low, high in catalog.temperature_ranges:
        if low <= celsius <= high:
            return label
    return None
