"""Task specifications: what to do in a scene and what the answer looks like."""

from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional, Tuple

from ..environment.runtime import ActionCall
from ..errors import DatasetError, ProtocolError
from ..protocol.automaton import replay
from ..protocol.tokens import Token, span, words
from ..scene.model import Scene
from .templates import sensor_slots

TASK_KINDS = (
    "captioning",
    "qa",
    "dialogue",
    "retrieval",
    "tool_use",
    "task_decomposition",
    "rearrangement",
)

# sensor slot -> action on the answer object that produces it
SLOT_ACTIONS = {"temp_adj": "TOUCH", "hardness_adj": "TOUCH", "material": "HIT"}


@dataclass(frozen=True)
class TaskSpec:
    """One generated task.

    ``gt_actions`` carry explicit object ids so that realization does not
    depend on any learned component. Sensor slots in
    ``gt_answer_template`` are filled from observations of
    ``answer_object``; the other slots come from ``static_slots``.
    """

    kind: str
    prompt: str
    target_objects: Tuple[int, ...]
    gt_actions: Tuple[ActionCall, ...]
    gt_answer_template: str
    template_id: str = ""
    answer_object: Optional[int] = None
    static_slots: Dict[str, str] = field(default_factory=dict)
    meta: Dict[str, Any] = field(default_factory=dict)

    @property
    def sensor_slots(self) -> List[str]:
        return sensor_slots(self.gt_answer_template)

    def action_tokens(self) -> List[Token]:
        tokens: List[Token] = []
        for call in self.gt_actions:
            tokens.append(Token.action(call.name))
            tokens.extend(words(" ".join(call.words)))
        return tokens

    def check(self, scene: Scene) -> List[str]:
        """Problems with this task in ``scene``; empty when the task is sound.

        Checks that every referenced object exists, that the actions are
        legal once the scene is framed and that each sensor slot is produced
        by an action on the answer object.
        """
        problems: List[str] = []
        count = len(scene.objects)
        referenced = list(self.target_objects)
        referenced += [c.object_id for c in self.gt_actions if c.object_id is not None]
        if self.answer_object is not None:
            referenced.append(self.answer_object)
        for object_id in referenced:
            if not 0 <= object_id < count:
                problems.append(f"object {object_id} is not in {scene.id}")

        framing = span("SCENE", "p0")
        try:
            replay(framing + self.action_tokens())
        except ProtocolError as e:
            problems.append(f"actions are illegal: {e}")

        for slot in self.sensor_slots:
            needed = SLOT_ACTIONS[slot]
            if not any(
                c.name == needed and c.object_id == self.answer_object
                for c in self.gt_actions
            ):
                problems.append(
                    f"slot {slot} needs {needed} on object {self.answer_object}"
                )
        return problems

    def to_dict(self) -> Dict[str, Any]:
        return {
            "kind": self.kind,
            "prompt": self.prompt,
            "target_objects": list(self.target_objects),
            "gt_actions": [c.to_dict() for c in self.gt_actions],
            "gt_answer_template": self.gt_answer_template,
            "template_id": self.template_id,
            "answer_object": self.answer_object,
            "static_slots": dict(self.static_slots),
            "meta": dict(self.meta),
        }

    @classmethod
    def from_dict(cls, raw: Dict[str, Any]) -> "TaskSpec":
        try:
            kind = raw["kind"]
            if kind not in TASK_KINDS:
                raise DatasetError(f"unknown task kind {kind!r}")
            return cls(
                kind=kind,
                prompt=raw["prompt"],
                target_objects=tuple(raw.get("target_objects", ())),
                gt_actions=tuple(ActionCall.from_dict(c) for c in raw["gt_actions"]),
                gt_answer_template=raw["gt_answer_template"],
                template_id=raw.get("template_id", ""),
                answer_object=raw.get("answer_object"),
                static_slots=dict(raw.get("static_slots", {})),
                meta=dict(raw.get("meta", {})),
            )
        except DatasetError:
            raise
        except (KeyError, TypeError, ValueError) as e:
            raise DatasetError(f"malformed task record: {e}") from e
