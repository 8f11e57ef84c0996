"""Baseline policies.

Three regimes share one environment and one token stream format:
``no_interaction`` ranks objects by what a camera sees, ``oracle_interaction``
walks to every candidate and averages the sensed embeddings, and
``interactive_trained`` is a scripted controller driven by the trained SELECT
head and the attribute classifiers.
"""

import enum
import logging
from dataclasses import dataclass, field
from typing import Any, Dict, Iterable, List, Optional, Sequence, Tuple

import numpy as np

from ..embedding.adapters import AdapterParams, adapt
from ..embedding.alignment import aligned_params
from ..embedding.concepts import tokenize
from ..embedding.encoders import Modality, cosine, encode, encode_text, size_word
from ..embedding.select_head import select_query, select_rows, select_scores
from ..environment.episode import Episode, finish_episode
from ..environment.payloads import decode_celsius, decode_clip, decode_tactile
from ..environment.runtime import ActionCall, Environment, Observation
from ..errors import ActionError, EvaluationError
from ..scene.catalog import Catalog, MaterialProfile
from ..scene.model import ObjectInstance
from ..taskgen.spec import TaskSpec
from ..taskgen.templates import TemplateBank, load_templates, render
from ..taskgen.tools import Recipe, Requirement, Situation, ToolTable, load_tools
from .classifiers import AttributeClassifiers, default_classifiers

logger = logging.getLogger("EmbodySim.evaluation")

SENSES = ("visual", "impact_sound", "tactile", "temperature")
NOT_FOUND = "not found"
DEFAULT_CANDIDATES = 6
CARRY_KINDS = ("retrieval", "tool_use", "dialogue")


class PolicyKind(str, enum.Enum):
    NO_INTERACTION = "no_interaction"
    ORACLE_INTERACTION = "oracle_interaction"
    INTERACTIVE_TRAINED = "interactive_trained"


@dataclass(frozen=True)
class PolicySpec:
    """A policy regime with the senses it may use.

    ``params`` holds the trained adapters for interactive_trained; the
    aligned untrained adapters are used when it is omitted.
    """

    kind: PolicyKind
    modalities: Tuple[str, ...] = SENSES
    params: Optional[AdapterParams] = field(default=None, compare=False, repr=False)

    def __post_init__(self):
        object.__setattr__(self, "kind", PolicyKind(self.kind))
        unknown = sorted(set(self.modalities) - set(SENSES))
        if unknown:
            raise EvaluationError(
                f"unknown modalities {unknown}; expected a subset of {SENSES}"
            )
        if self.kind is PolicyKind.ORACLE_INTERACTION and not self.modalities:
            raise EvaluationError("oracle_interaction needs at least one modality")
        ordered = tuple(m for m in SENSES if m in self.modalities)
        object.__setattr__(self, "modalities", ordered)

    @property
    def name(self) -> str:
        if self.kind is PolicyKind.NO_INTERACTION:
            return self.kind.value
        return f"{self.kind.value}[{'+'.join(self.modalities) or 'none'}]"


@dataclass
class PolicyResult:
    chosen: Optional[int]
    answer: str = ""
    episode: Optional[Episode] = None
    actions: int = 0
    retrieved: Tuple[int, ...] = ()


# -- query understanding -------------------------------------------------


@dataclass(frozen=True)
class Constraint:
    """A condition on one sensed attribute.

    ``attribute`` is material, hardness_word, temp_label (matched against
    ``allowed``) or hardness (bounded by ``low``/``high``).
    """

    attribute: str
    allowed: Tuple[str, ...] = ()
    low: Optional[float] = None
    high: Optional[float] = None

    def satisfied(self, observed: Dict[str, Any]) -> bool:
        """True when met, or when the attribute was not sensed."""
        if self.attribute not in observed:
            return True
        value = observed[self.attribute]
        if self.attribute == "hardness":
            above = self.low is None or value >= self.low - 1e-9
            below = self.high is None or value <= self.high + 1e-9
            return above and below
        return value in self.allowed

    @classmethod
    def from_requirement(cls, requirement: Requirement) -> "Constraint":
        if requirement.key == "min_hardness":
            return cls("hardness", low=requirement.value)
        if requirement.key == "max_hardness":
            return cls("hardness", high=requirement.value)
        if requirement.key == "materials":
            return cls("material", allowed=tuple(requirement.value))
        return cls("temp_label", allowed=tuple(requirement.value))


def parse_query(text: str, catalog: Catalog, bank: TemplateBank) -> List[Constraint]:
    """Attribute words of a request: materials, hardness words and temperature words."""
    words = tokenize(text)
    padded = f" {' '.join(words)} "
    materials = tuple(m.name for m in catalog.materials if m.name in words)
    hardness = tuple(
        m.hardness_word for m in catalog.materials if m.hardness_word in words
    )
    temps = tuple(
        label
        for label, word in bank.temperature_words.items()
        if f" {' '.join(tokenize(word))} " in padded
    )
    constraints = []
    if materials:
        constraints.append(Constraint("material", allowed=materials))
    if hardness:
        constraints.append(Constraint("hardness_word", allowed=hardness))
    if temps:
        constraints.append(Constraint("temp_label", allowed=temps))
    return constraints


def match_situation(text: str, tools: ToolTable) -> Optional[Situation]:
    for situation in tools.situations:
        if situation.text in text:
            return situation
    return None


def match_recipe(text: str, tools: ToolTable) -> Optional[Recipe]:
    for recipe in tools.recipes:
        if recipe.goal in text:
            return recipe
    return None


def task_constraints(
    task: TaskSpec, catalog: Catalog, bank: TemplateBank, tools: ToolTable
) -> List[Constraint]:
    if task.kind == "tool_use":
        situation = match_situation(task.prompt, tools)
        return [Constraint.from_requirement(situation.requires)] if situation else []
    if task.kind == "retrieval":
        return parse_query(task.prompt, catalog, bank)
    # Other requests name the object and ask about its attributes.
    return []


# -- sensing ---------------------------------------------------------------


def sensing_actions(attributes: Iterable[str], modalities: Sequence[str]) -> List[str]:
    """Contact actions that reveal the attributes with the allowed senses.

    Material is heard first and felt otherwise; hardness is felt first and
    inferred from the sound otherwise; temperature needs a touch.
    """
    needed = set()
    for attribute in attributes:
        if attribute == "material":
            order = (("impact_sound", "HIT"), ("tactile", "TOUCH"))
        elif attribute in ("hardness", "hardness_word"):
            order = (("tactile", "TOUCH"), ("impact_sound", "HIT"))
        else:
            order = (("temperature", "TOUCH"),)
        for sense, action in order:
            if sense in modalities:
                needed.add(action)
                break
    return [a for a in ("HIT", "TOUCH") if a in needed]


SLOT_ATTRIBUTES = {
    "material": "material",
    "hardness_adj": "hardness_word",
    "temp_adj": "temp_label",
}


def sensed_attributes(
    observations: Sequence[Observation],
    modalities: Sequence[str],
    classifiers: AttributeClassifiers,
) -> Dict[str, Any]:
    """What the allowed senses say about an object."""
    heard: Optional[MaterialProfile] = None
    felt: Optional[MaterialProfile] = None
    observed: Dict[str, Any] = {}
    for obs in observations:
        record = obs.payload
        if record.kind == "IMPACT_SOUND" and "impact_sound" in modalities:
            name = classifiers.material(decode_clip(record))
            heard = classifiers.catalog.material(name)
        elif record.kind == "TACTILE" and "tactile" in modalities:
            felt = classifiers.hardness_material(decode_tactile(record))
        elif record.kind == "TEMPERATURE" and "temperature" in modalities:
            celsius = decode_celsius(record)
            observed["temp_label"] = classifiers.temperature_label(celsius)
    by_material = heard or felt
    by_hardness = felt or heard
    if by_material is not None:
        observed["material"] = by_material.name
    if by_hardness is not None:
        observed["hardness"] = by_hardness.hardness
        observed["hardness_word"] = by_hardness.hardness_word
    return observed


def category_text(obj: ObjectInstance) -> str:
    return obj.category.replace("_", " ")


def compose_answer(
    task: TaskSpec,
    obj: ObjectInstance,
    observed: Dict[str, Any],
    catalog: Catalog,
    bank: TemplateBank,
) -> str:
    """Fill the task's answer template from what was seen and sensed.

    Unsensed slots fall back to the category's most common material and to
    room temperature.
    """
    values = dict(task.static_slots)
    values["category"] = category_text(obj)
    values["size"] = size_word(obj.bbox.half)
    prior = catalog.material(catalog.category(obj.category).materials[0])
    values["material"] = observed.get("material", prior.name)
    values["hardness_adj"] = observed.get("hardness_word", prior.hardness_word)
    values["temp_adj"] = bank.temperature_word(observed.get("temp_label", "room"))
    return render(task.gt_answer_template, values)


def _approach(
    env: Environment, obj: ObjectInstance, actions: Sequence[str]
) -> List[Observation]:
    words = tuple(category_text(obj).split())
    env.execute(ActionCall("SELECT", object_id=obj.id, words=words))
    env.execute(ActionCall("NAVIGATE", object_id=obj.id))
    observations = []
    for name in actions:
        observations.extend(env.execute(ActionCall(name, object_id=obj.id)))
    return observations


def _physical(env: Environment) -> int:
    return sum(1 for c in env.calls if c.name != "SELECT")


# -- policies -------------------------------------------------------------


def argmax_lowest_id(scores: Sequence[float]) -> int:
    best = 0
    for i, score in enumerate(scores):
        if score > scores[best]:
            best = i
    return best


def policy_no_interaction(task: TaskSpec, scene_features: np.ndarray) -> int:
    """Object whose feature row is most similar to the request.

    Ties go to the lowest id.
    """
    query = encode_text(task.prompt)
    return argmax_lowest_id([cosine(query, row) for row in scene_features])


def ranked_by_cosine(query: np.ndarray, rows: np.ndarray, limit: int) -> List[int]:
    scores = [cosine(query, row) for row in rows]
    return sorted(range(len(scores)), key=lambda i: (-scores[i], i))[:limit]


def policy_oracle_interaction(
    task: TaskSpec,
    env: Environment,
    modalities: Sequence[str] = SENSES,
    params: Optional[AdapterParams] = None,
    limit: int = DEFAULT_CANDIDATES,
) -> PolicyResult:
    """Scripted interaction with every candidate, then embedding retrieval.

    Candidates are the ``limit`` objects most similar to the request by
    sight (all objects when sight is masked). Each one is approached and
    touched and/or struck as the modalities permit (at most three physical
    actions); its visual feature and adapted sensor embeddings are averaged
    and compared to the request. A candidate whose actions fail scores -inf.
    With only ``visual`` this is exactly ``policy_no_interaction``.
    """
    spec = PolicySpec(PolicyKind.ORACLE_INTERACTION, tuple(modalities))
    params = params or aligned_params()
    env.reset(task.prompt)
    query = encode_text(task.prompt)
    if "visual" in spec.modalities:
        candidates = ranked_by_cosine(query, env.features, limit)
    else:
        candidates = list(range(len(env.scene.objects)))
    actions = []
    if {"tactile", "temperature"} & set(spec.modalities):
        actions.append("TOUCH")
    if "impact_sound" in spec.modalities:
        actions.append("HIT")

    scores = []
    for object_id in candidates:
        vectors = []
        if "visual" in spec.modalities:
            vectors.append(env.features[object_id])
        try:
            observations = (
                _approach(env, env.scene.object(object_id), actions)
                if actions
                else []
            )
        except ActionError as e:
            logger.debug(f"Oracle candidate {object_id} failed: {e}")
            scores.append(-np.inf)
            continue
        for obs in observations:
            vector = _sensor_embedding(obs, spec.modalities, params)
            if vector is not None:
                vectors.append(vector / np.linalg.norm(vector))
        scores.append(cosine(query, np.mean(vectors, axis=0)) if vectors else -np.inf)

    chosen = None
    if scores and np.isfinite(max(scores)):
        chosen = candidates[argmax_lowest_id(scores)]
    episode = finish_episode(env, "oracle", task.prompt, chosen_object=chosen)
    return PolicyResult(chosen=chosen, episode=episode, actions=_physical(env))


def _sensor_embedding(
    obs: Observation, modalities: Sequence[str], params: AdapterParams
):
    record = obs.payload
    if record.kind == "IMPACT_SOUND" and "impact_sound" in modalities:
        modality, data = Modality.IMPACT_SOUND, decode_clip(record)
    elif record.kind == "TACTILE" and "tactile" in modalities:
        modality, data = Modality.TACTILE, decode_tactile(record)
    elif record.kind == "TEMPERATURE" and "temperature" in modalities:
        modality, data = Modality.TEMPERATURE, decode_celsius(record)
    else:
        return None
    return adapt(params, modality, encode(modality, data))


def rank_candidates(
    task: TaskSpec,
    env: Environment,
    params: AdapterParams,
    modalities: Sequence[str],
    tools: ToolTable,
    limit: int,
) -> List[int]:
    """Objects to interrogate, in order.

    With sight: the situation's portable tool categories for tool use,
    otherwise the top SELECT-head scores. Without sight: every object by id.
    """
    scene = env.scene
    if "visual" not in modalities:
        return [o.id for o in scene.objects]
    if task.kind == "tool_use":
        situation = match_situation(task.prompt, tools)
        if situation is not None:
            return sorted(o.id for o in situation.candidates(scene))
    query = select_query(params, encode_text(task.prompt))
    scores = select_scores(query, select_rows(env.features), params)
    return sorted(range(len(scores)), key=lambda i: (-scores[i], i))[:limit]


def policy_interactive_trained(
    task: TaskSpec,
    env: Environment,
    params: Optional[AdapterParams] = None,
    modalities: Sequence[str] = SENSES,
    classifiers: Optional[AttributeClassifiers] = None,
    bank: Optional[TemplateBank] = None,
    tools: Optional[ToolTable] = None,
    limit: int = DEFAULT_CANDIDATES,
    episode_id: str = "interactive",
) -> PolicyResult:
    """Interrogate candidates until one satisfies every sensed constraint.

    Candidates come from ``rank_candidates``. Each is approached and sensed
    with the actions its unresolved query attributes and answer slots call
    for; constraints the masked senses cannot check are taken as met. The
    first satisfying candidate is picked up when the task asks to fetch it.
    When none is left the answer is "not found".
    """
    spec = PolicySpec(PolicyKind.INTERACTIVE_TRAINED, tuple(modalities))
    params = params or aligned_params()
    classifiers = classifiers or default_classifiers()
    bank = bank or load_templates()
    tools = tools or load_tools()
    catalog = classifiers.catalog

    if task.kind == "task_decomposition":
        return _decompose(task, env, spec.modalities, classifiers, tools, episode_id)

    env.reset(task.prompt)
    constraints = task_constraints(task, catalog, bank, tools)
    wanted = [c.attribute for c in constraints]
    wanted += [SLOT_ATTRIBUTES[s] for s in task.sensor_slots]
    actions = sensing_actions(wanted, spec.modalities)

    chosen, observed = None, {}
    for object_id in rank_candidates(task, env, params, spec.modalities, tools, limit):
        obj = env.scene.object(object_id)
        try:
            observations = _approach(env, obj, actions)
            sensed = sensed_attributes(observations, spec.modalities, classifiers)
        except ActionError as e:
            logger.debug(f"Skipping candidate {object_id}: {e}")
            continue
        if all(c.satisfied(sensed) for c in constraints):
            chosen, observed = object_id, sensed
            break

    if chosen is None:
        episode = finish_episode(env, episode_id, task.prompt, NOT_FOUND)
        return PolicyResult(
            chosen=None, answer=NOT_FOUND, episode=episode, actions=_physical(env)
        )

    obj = env.scene.object(chosen)
    if task.kind in CARRY_KINDS and obj.portable:
        env.execute(ActionCall("PICK-UP", object_id=chosen))
    answer = compose_answer(task, obj, observed, catalog, bank)
    episode = finish_episode(env, episode_id, task.prompt, answer, chosen_object=chosen)
    return PolicyResult(
        chosen=chosen, answer=answer, episode=episode, actions=_physical(env)
    )


def _decompose(
    task: TaskSpec,
    env: Environment,
    modalities: Sequence[str],
    classifiers: AttributeClassifiers,
    tools: ToolTable,
    episode_id: str,
) -> PolicyResult:
    """Fill each recipe role with the first visible candidate whose reading agrees."""
    env.reset(task.prompt)
    recipe = match_recipe(task.prompt, tools)
    if recipe is None:
        episode = finish_episode(env, episode_id, task.prompt, NOT_FOUND)
        return PolicyResult(chosen=None, answer=NOT_FOUND, episode=episode)
    retrieved: List[int] = []
    for role in recipe.roles:
        constraint = Constraint.from_requirement(role.requires)
        actions = sensing_actions([constraint.attribute], modalities)
        for obj in env.scene.objects:
            if (
                obj.id in retrieved
                or not obj.portable
                or obj.category not in role.categories
            ):
                continue
            observations = _approach(env, obj, [])
            if env.agent.held is not None:
                env.execute(ActionCall("PUT-DOWN"))
            for name in actions:
                observations.extend(env.execute(ActionCall(name, object_id=obj.id)))
            sensed = sensed_attributes(observations, modalities, classifiers)
            if constraint.satisfied(sensed):
                env.execute(ActionCall("PICK-UP", object_id=obj.id))
                retrieved.append(obj.id)
                break
    items = " and ".join(category_text(env.scene.object(i)) for i in retrieved)
    answer = NOT_FOUND
    if retrieved:
        values = {**task.static_slots, "items": items}
        answer = render(task.gt_answer_template, values)
    episode = finish_episode(env, episode_id, task.prompt, answer)
    return PolicyResult(
        chosen=retrieved[-1] if retrieved else None,
        answer=answer,
        episode=episode,
        actions=_physical(env),
        retrieved=tuple(retrieved),
    )


def decompose_without_interaction(
    task: TaskSpec, env: Environment, tools: ToolTable
) -> PolicyResult:
    """Fill each role with the first visible object of an allowed category."""
    env.reset(task.prompt)
    recipe = match_recipe(task.prompt, tools)
    retrieved: List[int] = []
    for role in recipe.roles if recipe else ():
        for obj in env.scene.objects:
            if (
                obj.id not in retrieved
                and obj.portable
                and obj.category in role.categories
            ):
                retrieved.append(obj.id)
                break
    return PolicyResult(
        chosen=retrieved[-1] if retrieved else None, retrieved=tuple(retrieved)
    )
