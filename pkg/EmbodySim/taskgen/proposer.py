"""Rule-based task proposal: tasks, ground-truth actions and answer templates."""

import logging
from dataclasses import dataclass, field
from typing import Any, Callable, Dict, List, Optional, Sequence, Tuple

from ..embedding.encoders import size_word
from ..environment.runtime import ActionCall
from ..errors import TaskGenerationError
from ..scene.model import ObjectInstance, Scene
from ..utils.seeding import rng_for
from .spec import TASK_KINDS, TaskSpec
from .templates import TemplateBank, load_templates, render
from .tools import ToolTable, load_tools, role_assignment

logger = logging.getLogger("EmbodySim.taskgen")

EXTREME_TEMPS = ("hot", "cold")

# varied twin attribute -> action that tells twins apart
SENSE_FOR = {"material": "HIT", "hardness": "TOUCH", "temp_label": "TOUCH"}
TOOL_VARIANTS = {
    "material": "material",
    "hardness": "hardness",
    "temp_label": "temperature",
}


@dataclass(frozen=True)
class Draft:
    """A task before its wording is chosen."""

    kind: str
    variant: str
    target_objects: Tuple[int, ...]
    actions: Tuple[ActionCall, ...]
    answer_object: Optional[int]
    static: Dict[str, str]
    meta: Dict[str, Any] = field(default_factory=dict)


def category_text(obj: ObjectInstance) -> str:
    return obj.category.replace("_", " ")


def static_slots(obj: ObjectInstance) -> Dict[str, str]:
    return {"category": category_text(obj), "size": size_word(obj.bbox.half)}


def select_call(obj: ObjectInstance) -> ActionCall:
    words = tuple(category_text(obj).split())
    return ActionCall("SELECT", object_id=obj.id, words=words)


def approach(obj: ObjectInstance, *actions: str) -> List[ActionCall]:
    """SELECT the object, walk to it and run ``actions`` on it."""
    calls = [select_call(obj), ActionCall("NAVIGATE", object_id=obj.id)]
    calls.extend(ActionCall(name, object_id=obj.id) for name in actions)
    return calls


def descriptor_words(obj: ObjectInstance, varied: str, bank: TemplateBank) -> str:
    """Words that single a twin out, preceded by a shared attribute when it is telling.

    Material and hardness twins are prefixed with a hot or cold temperature
    word; temperature twins are followed by their shared material.
    """
    if varied == "temp_label":
        return f"{bank.temperature_word(obj.temp_label)} {obj.material.name}"
    word = obj.material.name if varied == "material" else obj.material.hardness_word
    if obj.temp_label in EXTREME_TEMPS:
        return f"{bank.temperature_word(obj.temp_label)} {word}"
    return word


def captioning_drafts(
    scene: Scene, bank: TemplateBank, tools: ToolTable
) -> List[Draft]:
    drafts = []
    for obj in scene.objects:
        target, slots = (obj.id,), static_slots(obj)
        drafts.append(Draft("captioning", "glance", target, (), obj.id, slots))
        actions = tuple(approach(obj, "HIT", "TOUCH"))
        drafts.append(
            Draft("captioning", "multisensory", target, actions, obj.id, slots)
        )
        if obj.temp_label in EXTREME_TEMPS:
            drafts.append(
                Draft("captioning", "thermal", target, actions, obj.id, slots)
            )
    return drafts


def qa_drafts(scene: Scene, bank: TemplateBank, tools: ToolTable) -> List[Draft]:
    drafts = []
    for obj in scene.objects:
        target = (obj.id,)
        slots = static_slots(obj)
        hit = tuple(approach(obj, "HIT"))
        drafts.append(Draft("qa", "material", target, hit, obj.id, slots))
        touch = tuple(approach(obj, "TOUCH"))
        drafts.append(Draft("qa", "hardness", target, touch, obj.id, slots))
        if obj.temp_label in EXTREME_TEMPS:
            drafts.append(Draft("qa", "temperature", target, touch, obj.id, slots))
    return drafts


def dialogue_drafts(scene: Scene, bank: TemplateBank, tools: ToolTable) -> List[Draft]:
    drafts = []
    for obj in scene.objects:
        if not obj.portable:
            continue
        target = (obj.id,)
        slots = static_slots(obj)
        hit = tuple(approach(obj, "HIT", "PICK-UP"))
        drafts.append(Draft("dialogue", "material", target, hit, obj.id, slots))
        if obj.temp_label in EXTREME_TEMPS:
            touch = tuple(approach(obj, "TOUCH", "PICK-UP"))
            drafts.append(Draft("dialogue", "thermal", target, touch, obj.id, slots))
    return drafts


def retrieval_drafts(scene: Scene, bank: TemplateBank, tools: ToolTable) -> List[Draft]:
    """One draft per twin: sense twins in id order up to the target, then pick it up."""
    drafts = []
    for group in scene.twin_groups:
        ids = sorted(group.ids)
        sensing = SENSE_FOR[group.varied]
        for target_id in ids:
            target = scene.object(target_id)
            actions: List[ActionCall] = []
            for twin_id in ids[: ids.index(target_id) + 1]:
                actions.extend(approach(scene.object(twin_id), sensing))
            actions.append(ActionCall("PICK-UP", object_id=target_id))
            slots = static_slots(target)
            slots["descriptor"] = descriptor_words(target, group.varied, bank)
            drafts.append(
                Draft(
                    "retrieval",
                    group.varied,
                    (target_id,),
                    tuple(actions),
                    target_id,
                    slots,
                    {"twins": ids, "varied": group.varied},
                )
            )
    return drafts


def tool_use_drafts(scene: Scene, bank: TemplateBank, tools: ToolTable) -> List[Draft]:
    """Situations with exactly one satisfying candidate among the portable ones."""
    drafts = []
    for situation in tools.situations:
        candidates = sorted(situation.candidates(scene), key=lambda o: o.id)
        satisfying = [o for o in candidates if situation.requires.satisfied_by(o)]
        if len(satisfying) != 1:
            continue
        tool = satisfying[0]
        sensing = situation.requires.sense_action
        actions: List[ActionCall] = []
        for obj in candidates[: candidates.index(tool) + 1]:
            actions.extend(approach(obj, sensing))
        actions.append(ActionCall("PICK-UP", object_id=tool.id))
        slots = static_slots(tool)
        slots["situation"] = situation.text
        drafts.append(
            Draft(
                "tool_use",
                TOOL_VARIANTS[situation.requires.attribute],
                (tool.id,),
                tuple(actions),
                tool.id,
                slots,
                {"situation": situation.id, "candidates": [o.id for o in candidates]},
            )
        )
    return drafts


def task_decomposition_drafts(
    scene: Scene, bank: TemplateBank, tools: ToolTable
) -> List[Draft]:
    """Gather one valid combination for each recipe the scene can satisfy.

    Each item is sensed and picked up; the previous item is put down next
    to the following one, so the last item stays in hand.
    """
    portable = [o for o in scene.objects if o.portable]
    drafts = []
    for recipe in tools.recipes:
        chosen = role_assignment(recipe, portable)
        if chosen is None:
            continue
        actions: List[ActionCall] = []
        for index, (role, obj) in enumerate(zip(recipe.roles, chosen)):
            actions.append(select_call(obj))
            actions.append(ActionCall("NAVIGATE", object_id=obj.id))
            if index:
                actions.append(ActionCall("PUT-DOWN"))
            actions.append(ActionCall(role.requires.sense_action, object_id=obj.id))
            actions.append(ActionCall("PICK-UP", object_id=obj.id))
        items = " and ".join(category_text(o) for o in chosen)
        drafts.append(
            Draft(
                "task_decomposition",
                "plan",
                tuple(o.id for o in chosen),
                tuple(actions),
                None,
                {"goal": recipe.goal, "items": items},
                {"recipe": recipe.id},
            )
        )
    return drafts


def rearrangement_drafts(
    scene: Scene, bank: TemplateBank, tools: ToolTable
) -> List[Draft]:
    """Carry each portable object to every other object and put it down there."""
    drafts = []
    for obj in scene.objects:
        if not obj.portable:
            continue
        for destination in scene.objects:
            if destination.id == obj.id:
                continue
            actions = approach(obj, "PICK-UP")
            actions.append(select_call(destination))
            actions.append(ActionCall("NAVIGATE", object_id=destination.id))
            actions.append(ActionCall("PUT-DOWN"))
            slots = static_slots(obj)
            slots["destination"] = category_text(destination)
            drafts.append(
                Draft(
                    "rearrangement",
                    "place",
                    (obj.id, destination.id),
                    tuple(actions),
                    obj.id,
                    slots,
                    {"destination": destination.id},
                )
            )
    return drafts


DRAFTERS: Dict[str, Callable[[Scene, TemplateBank, ToolTable], List[Draft]]] = {
    "captioning": captioning_drafts,
    "qa": qa_drafts,
    "dialogue": dialogue_drafts,
    "retrieval": retrieval_drafts,
    "tool_use": tool_use_drafts,
    "task_decomposition": task_decomposition_drafts,
    "rearrangement": rearrangement_drafts,
}


def word_task(
    draft: Draft, bank: TemplateBank, prompt_index: int, answer_index: int
) -> TaskSpec:
    """Choose the prompt and answer paraphrases of a draft."""
    templates = bank.variant(draft.kind, draft.variant)
    prompt = render(templates.prompts[prompt_index], draft.static)
    return TaskSpec(
        kind=draft.kind,
        prompt=prompt,
        target_objects=draft.target_objects,
        gt_actions=draft.actions,
        gt_answer_template=templates.answers[answer_index],
        template_id=f"{draft.kind}.{draft.variant}.{answer_index}",
        answer_object=draft.answer_object,
        static_slots=dict(draft.static),
        meta={"variant": draft.variant, **draft.meta},
    )


def propose_tasks(
    scene: Scene,
    kinds: Sequence[str] = TASK_KINDS,
    n: int = 10,
    seed: int = 0,
    bank: Optional[TemplateBank] = None,
    tools: Optional[ToolTable] = None,
) -> List[TaskSpec]:
    """Propose ``n`` tasks for a scene, cycling through the requested kinds.

    Kinds the scene cannot support (no twins for retrieval, no uniquely
    satisfying tool, ...) are skipped with a warning.

    Args:
        scene: A valid scene
        kinds: Task kinds to draw from
        n: Number of tasks, at least 1
        seed: Seed for draft and paraphrase choice
        bank: Template bank (built-in if omitted)
        tools: Tool table (built-in if omitted)

    Returns:
        ``n`` TaskSpec; identical for identical arguments

    Raises:
        ValueError: n < 1
        TaskGenerationError: Unknown kind, or no requested kind is possible
    """
    if n < 1:
        raise ValueError(f"n must be >= 1, got {n}")
    unknown = [k for k in kinds if k not in DRAFTERS]
    if unknown:
        raise TaskGenerationError(f"unknown task kinds: {unknown}")
    bank = bank or load_templates()
    tools = tools or load_tools()

    drafts: Dict[str, List[Draft]] = {}
    for kind in kinds:
        found = DRAFTERS[kind](scene, bank, tools)
        if found:
            drafts[kind] = found
        else:
            logger.warning(f"Scene {scene.id} supports no {kind} task, skipping")
    if not drafts:
        raise TaskGenerationError(
            f"no task of kinds {list(kinds)} is possible in {scene.id}"
        )

    available = [k for k in kinds if k in drafts]
    rng = rng_for("tasks", seed, scene.id)
    tasks = []
    for i in range(n):
        pool = drafts[available[i % len(available)]]
        draft = pool[int(rng.integers(len(pool)))]
        templates = bank.variant(draft.kind, draft.variant)
        prompt_index = int(rng.integers(len(templates.prompts)))
        answer_index = int(rng.integers(len(templates.answers)))
        tasks.append(word_task(draft, bank, prompt_index, answer_index))
    logger.debug(f"Proposed {len(tasks)} tasks for {scene.id} over kinds {available}")
    return tasks
