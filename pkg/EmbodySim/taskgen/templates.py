"""Paraphrase bank: loading, rendering and slot discovery."""

import logging
import string
from dataclasses import dataclass
from functools import lru_cache
from pathlib import Path
from typing import Any, Dict, List, Mapping, Optional, Set, Tuple, Union

import yaml

from ..errors import CatalogError, TaskGenerationError
from ..scene.catalog import DATA_DIR, TEMP_LABELS

logger = logging.getLogger("EmbodySim.taskgen")

DEFAULT_TEMPLATES_PATH = DATA_DIR / "templates.yaml"

SENSOR_SLOTS = ("temp_adj", "hardness_adj", "material")
MIN_PARAPHRASES = 5

_FORMATTER = string.Formatter()


@dataclass(frozen=True)
class TemplateSet:
    prompts: Tuple[str, ...]
    answers: Tuple[str, ...]


@dataclass(frozen=True)
class TemplateBank:
    version: int
    temperature_words: Dict[str, str]
    captions: Dict[str, str]
    kinds: Dict[str, Dict[str, TemplateSet]]

    def variant(self, kind: str, variant: str) -> TemplateSet:
        try:
            return self.kinds[kind][variant]
        except KeyError:
            raise TaskGenerationError(f"no templates for {kind}.{variant}") from None

    def answer(self, template_id: str) -> str:
        kind, variant, index = template_id.rsplit(".", 2)
        return self.variant(kind, variant).answers[int(index)]

    def temperature_word(self, label: str) -> str:
        return self.temperature_words[label]


def parse_templates(raw: Dict[str, Any]) -> TemplateBank:
    """Build a TemplateBank, checking paraphrase counts and template syntax."""
    try:
        words = dict(raw["words"]["temperature"])
        if set(words) != set(TEMP_LABELS):
            raise CatalogError(f"temperature words must cover {TEMP_LABELS}")
        kinds: Dict[str, Dict[str, TemplateSet]] = {}
        for kind, variants in raw["kinds"].items():
            kinds[kind] = {}
            for name, entry in variants.items():
                entry_set = TemplateSet(
                    prompts=tuple(entry["prompts"]), answers=tuple(entry["answers"])
                )
                shortest = min(len(entry_set.prompts), len(entry_set.answers))
                if shortest < MIN_PARAPHRASES:
                    raise CatalogError(
                        f"{kind}.{name} needs at least {MIN_PARAPHRASES} paraphrases"
                    )
                for text in entry_set.prompts + entry_set.answers:
                    template_slots(text)
                kinds[kind][name] = entry_set
        return TemplateBank(
            version=int(raw["version"]),
            temperature_words=words,
            captions=dict(raw["captions"]),
            kinds=kinds,
        )
    except CatalogError:
        raise
    except (KeyError, TypeError, ValueError) as e:
        raise CatalogError(f"Malformed template bank: {e}") from e


def load_templates(path: Optional[Union[str, Path]] = None) -> TemplateBank:
    if path is None:
        return _builtin_templates()
    with open(path, "r") as f:
        bank = parse_templates(yaml.safe_load(f))
    logger.info(f"Loaded template bank v{bank.version} from {path}")
    return bank


@lru_cache(maxsize=1)
def _builtin_templates() -> TemplateBank:
    with open(DEFAULT_TEMPLATES_PATH, "r") as f:
        return parse_templates(yaml.safe_load(f))


@lru_cache(maxsize=512)
def _slots(text: str) -> frozenset:
    try:
        fields = [name for _, name, _, _ in _FORMATTER.parse(text) if name]
    except ValueError as e:
        raise CatalogError(f"Bad template syntax in {text!r}: {e}") from e
    if any(not name.isidentifier() for name in fields):
        raise CatalogError(f"Template slots must be plain names: {text!r}")
    return frozenset(fields)


def template_slots(text: str) -> Set[str]:
    """Every variable a template refers to."""
    return set(_slots(text))


def sensor_slots(text: str) -> List[str]:
    """Sensor slots of a template, in canonical order."""
    found = _slots(text)
    return [slot for slot in SENSOR_SLOTS if slot in found]


def render(text: str, values: Mapping[str, Any]) -> str:
    """Render a template; a missing slot raises TaskGenerationError."""
    try:
        return text.format_map(values)
    except KeyError as e:
        raise TaskGenerationError(f"unfilled slot in {text!r}: {e}") from e


def caption(modality: str, value: str, bank: Optional[TemplateBank] = None) -> str:
    """Alignment caption for a sensor modality, e.g. "it sounds like steel"."""
    bank = bank or load_templates()
    slot = {
        "impact_sound": "material",
        "tactile": "hardness_adj",
        "temperature": "temp_adj",
    }
    return render(bank.captions[modality], {slot[modality]: value})
