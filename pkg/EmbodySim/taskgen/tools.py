"""Tool-use situations and task-decomposition recipes."""

import itertools
import logging
from dataclasses import dataclass
from functools import lru_cache
from pathlib import Path
from typing import Any, Dict, Iterable, Optional, Sequence, Tuple, Union

import yaml

from ..errors import CatalogError
from ..scene.catalog import DATA_DIR, MATERIAL_NAMES, TEMP_LABELS
from ..scene.model import ObjectInstance, Scene

logger = logging.getLogger("EmbodySim.taskgen")

DEFAULT_TOOLS_PATH = DATA_DIR / "tools.yaml"

# requirement key -> (attribute it constrains, action that reveals it)
REQUIREMENT_KEYS = {
    "min_hardness": ("hardness", "TOUCH"),
    "max_hardness": ("hardness", "TOUCH"),
    "materials": ("material", "HIT"),
    "temp_labels": ("temp_label", "TOUCH"),
}


@dataclass(frozen=True)
class Requirement:
    key: str
    value: Any

    @property
    def attribute(self) -> str:
        return REQUIREMENT_KEYS[self.key][0]

    @property
    def sense_action(self) -> str:
        return REQUIREMENT_KEYS[self.key][1]

    def satisfied(self, material: str, hardness: float, temp_label: str) -> bool:
        if self.key == "min_hardness":
            return hardness >= self.value
        if self.key == "max_hardness":
            return hardness <= self.value
        if self.key == "materials":
            return material in self.value
        return temp_label in self.value

    def satisfied_by(self, obj: ObjectInstance) -> bool:
        return self.satisfied(obj.material.name, obj.material.hardness, obj.temp_label)


@dataclass(frozen=True)
class Situation:
    id: str
    text: str
    categories: Tuple[str, ...]
    requires: Requirement

    def candidates(self, scene: Scene) -> list:
        return [
            o for o in scene.objects if o.category in self.categories and o.portable
        ]


@dataclass(frozen=True)
class Role:
    name: str
    categories: Tuple[str, ...]
    requires: Requirement

    def accepts(self, obj: ObjectInstance) -> bool:
        return obj.category in self.categories and self.requires.satisfied_by(obj)


@dataclass(frozen=True)
class Recipe:
    id: str
    goal: str
    roles: Tuple[Role, ...]


@dataclass(frozen=True)
class ToolTable:
    version: int
    situations: Tuple[Situation, ...]
    recipes: Tuple[Recipe, ...]

    def recipe(self, recipe_id: str) -> Recipe:
        for recipe in self.recipes:
            if recipe.id == recipe_id:
                return recipe
        raise CatalogError(f"Unknown recipe: {recipe_id}")

    def situation(self, situation_id: str) -> Situation:
        for situation in self.situations:
            if situation.id == situation_id:
                return situation
        raise CatalogError(f"Unknown situation: {situation_id}")


def _requirement(raw: Dict[str, Any]) -> Requirement:
    if len(raw) != 1:
        raise CatalogError(f"exactly one requirement expected, got {sorted(raw)}")
    key, value = next(iter(raw.items()))
    if key not in REQUIREMENT_KEYS:
        raise CatalogError(f"unknown requirement {key}")
    if key == "materials" and not set(value) <= set(MATERIAL_NAMES):
        raise CatalogError(f"unknown materials in {value}")
    if key == "temp_labels" and not set(value) <= set(TEMP_LABELS):
        raise CatalogError(f"unknown temperature labels in {value}")
    if key in ("materials", "temp_labels"):
        value = tuple(value)
    else:
        value = float(value)
    return Requirement(key=key, value=value)


def parse_tools(raw: Dict[str, Any]) -> ToolTable:
    try:
        situations = tuple(
            Situation(
                id=s["id"],
                text=s["text"],
                categories=tuple(s["categories"]),
                requires=_requirement(s["requires"]),
            )
            for s in raw["situations"]
        )
        recipes = tuple(
            Recipe(
                id=r["id"],
                goal=r["goal"],
                roles=tuple(
                    Role(
                        name=role["name"],
                        categories=tuple(role["categories"]),
                        requires=_requirement(role["requires"]),
                    )
                    for role in r["roles"]
                ),
            )
            for r in raw["recipes"]
        )
        return ToolTable(
            version=int(raw["version"]), situations=situations, recipes=recipes
        )
    except CatalogError:
        raise
    except (KeyError, TypeError, ValueError) as e:
        raise CatalogError(f"Malformed tool table: {e}") from e


def load_tools(path: Optional[Union[str, Path]] = None) -> ToolTable:
    if path is None:
        return _builtin_tools()
    with open(path, "r") as f:
        return parse_tools(yaml.safe_load(f))


@lru_cache(maxsize=1)
def _builtin_tools() -> ToolTable:
    with open(DEFAULT_TOOLS_PATH, "r") as f:
        return parse_tools(yaml.safe_load(f))


def role_assignment(
    recipe: Recipe, objects: Sequence[ObjectInstance]
) -> Optional[Tuple[ObjectInstance, ...]]:
    """Distinct objects filling every role in order, or None."""
    for chosen in itertools.permutations(objects, len(recipe.roles)):
        if all(role.accepts(obj) for role, obj in zip(recipe.roles, chosen)):
            return chosen
    return None


def decomposition_success(
    recipe: Recipe, scene: Scene, retrieved: Iterable[int]
) -> int:
    """1 if the retrieved objects fill every role of the recipe, else 0.

    Any valid combination counts; order of retrieval does not matter.
    """
    objects = [scene.object(i) for i in sorted(set(retrieved))]
    return int(role_assignment(recipe, objects) is not None)
