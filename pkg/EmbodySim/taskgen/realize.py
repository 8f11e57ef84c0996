"""Executing a task's ground-truth actions and grounding its answer in sensing."""

import logging
from typing import Dict, List, Mapping, Optional, Sequence

from ..environment.episode import Episode, finish_episode
from ..environment.payloads import PayloadRecord
from ..environment.runtime import Environment
from ..errors import ActionError, EncodingError, TaskGenerationError
from ..evaluation.classifiers import AttributeClassifiers, default_classifiers
from ..protocol.tokens import TokenKind
from .spec import TaskSpec
from .templates import TemplateBank, load_templates, render

logger = logging.getLogger("EmbodySim.taskgen")

# sensor slot -> state token of the payload it is read from
SLOT_SOURCES = {
    "temp_adj": "TEMPERATURE",
    "hardness_adj": "TACTILE",
    "material": "IMPACT_SOUND",
}


def grounding_ref(
    slot: str,
    object_id: Optional[int],
    refs: Sequence[str],
    payloads: Mapping[str, PayloadRecord],
) -> Optional[str]:
    """Last payload, in stream order, that can fill ``slot`` for the object."""
    kind = SLOT_SOURCES[slot]
    found = None
    for ref in refs:
        record = payloads.get(ref)
        if record is not None and record.kind == kind and record.object_id == object_id:
            found = ref
    return found


def slot_word(
    slot: str,
    record: PayloadRecord,
    classifiers: AttributeClassifiers,
    bank: TemplateBank,
) -> str:
    value = classifiers.slot_value(slot, record)
    if slot == "temp_adj":
        return bank.temperature_word(value)
    return value


def fill_slots(
    task: TaskSpec,
    refs: Sequence[str],
    payloads: Mapping[str, PayloadRecord],
    classifiers: AttributeClassifiers,
    bank: TemplateBank,
) -> Dict[str, Dict[str, str]]:
    """Word and source payload for every sensor slot of the answer template."""
    filled = {}
    for slot in task.sensor_slots:
        ref = grounding_ref(slot, task.answer_object, refs, payloads)
        if ref is None:
            raise TaskGenerationError(
                f"no {SLOT_SOURCES[slot]} payload of object {task.answer_object} "
                f"to fill {slot}"
            )
        value = slot_word(slot, payloads[ref], classifiers, bank)
        filled[slot] = {"value": value, "ref": ref}
    return filled


def realize(
    task: TaskSpec,
    env: Environment,
    episode_id: str = "episode-0",
    classifiers: Optional[AttributeClassifiers] = None,
    bank: Optional[TemplateBank] = None,
) -> Episode:
    """Run the ground-truth actions and write the answer from the observations.

    Args:
        task: Task generated for ``env``'s scene
        env: Environment; it is reset first
        episode_id: Id recorded on the episode
        classifiers: Slot classifiers (calibrated defaults if omitted)
        bank: Template bank (built-in if omitted)

    Returns:
        Episode with status "ok", or "invalid" (no answer) when an action
        failed, e.g. an unreachable object
    """
    classifiers = classifiers or default_classifiers()
    bank = bank or load_templates()
    env.reset(task.prompt)
    try:
        for call in task.gt_actions:
            env.execute(call)
    except ActionError as e:
        logger.warning(
            f"Task {task.template_id} invalid in {env.initial_scene.id}: {e}"
        )
        return finish_episode(
            env,
            episode_id,
            task.prompt,
            status="invalid",
            error=str(e),
            task=task.to_dict(),
        )
    env.check_complete()

    refs = [t.value for t in env.stream if t.kind is TokenKind.PAYLOAD_REF]
    slots = fill_slots(task, refs, env.payloads, classifiers, bank)
    values = dict(task.static_slots)
    values.update({slot: entry["value"] for slot, entry in slots.items()})
    answer = render(task.gt_answer_template, values)
    held = env.agent.held
    return finish_episode(
        env,
        episode_id,
        task.prompt,
        answer,
        chosen_object=held if held is not None else task.answer_object,
        task=task.to_dict(),
        slots=slots,
    )


def answer_values(episode: Episode) -> Dict[str, str]:
    task = episode.task or {}
    values = dict(task.get("static_slots", {}))
    values.update({slot: entry["value"] for slot, entry in episode.slots.items()})
    return values


def answer_references(
    task: TaskSpec, values: Mapping[str, str], bank: Optional[TemplateBank] = None
) -> List[str]:
    """Every answer paraphrase of the task's variant, filled with the same values."""
    bank = bank or load_templates()
    variant = task.template_id.rsplit(".", 2)[1]
    return [render(text, values) for text in bank.variant(task.kind, variant).answers]


def audit_episode(
    episode: Episode,
    classifiers: Optional[AttributeClassifiers] = None,
    bank: Optional[TemplateBank] = None,
) -> List[str]:
    """Re-derive every filled sensor word from the recorded payloads.

    Returns:
        Problems found; empty when each word matches what its payload
        classifies as and every sensor slot of the template is filled
    """
    if not episode.ok or episode.task is None:
        return []
    classifiers = classifiers or default_classifiers()
    bank = bank or load_templates()
    task = TaskSpec.from_dict(episode.task)
    problems = []
    for slot in task.sensor_slots:
        if slot not in episode.slots:
            problems.append(f"{episode.episode_id}: slot {slot} was not filled")
    for slot, entry in sorted(episode.slots.items()):
        record = episode.payloads.get(entry.get("ref"))
        if record is None:
            problems.append(
                f"{episode.episode_id}: {slot} cites missing payload "
                f"{entry.get('ref')}"
            )
            continue
        if record.object_id != task.answer_object:
            problems.append(
                f"{episode.episode_id}: {slot} grounded on object {record.object_id}, "
                f"expected {task.answer_object}"
            )
            continue
        try:
            derived = slot_word(slot, record, classifiers, bank)
        except EncodingError as e:
            problems.append(f"{episode.episode_id}: {slot}: {e}")
            continue
        if derived != entry["value"]:
            problems.append(
                f"{episode.episode_id}: {slot} says {entry['value']!r}, "
                f"payload {entry['ref']} gives {derived!r}"
            )
    return problems
