"""Executes actions against a scene and frames what the agent perceives."""

import logging
import math
from dataclasses import asdict, dataclass, replace
from functools import lru_cache
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np

from ..embedding.adapters import AdapterParams
from ..embedding.concepts import content_words
from ..embedding.encoders import (
    Modality,
    encode,
    encode_text,
    encode_visual,
    scene_features,
)
from ..embedding.select_head import select_object
from ..errors import ActionError, ProtocolError, SceneValidationError
from ..protocol.automaton import (
    INITIAL,
    ProtocolState,
    Rule,
    check_complete,
    resolve,
    step,
)
from ..protocol.tokens import Token, TokenKind, span, words
from ..scene.model import Scene, Vec3
from ..scene.validation import validate_scene
from ..sensors.acoustic import N_STRIKE_SITES, hit
from ..sensors.geometry import observe
from ..sensors.heatmap import render_tactile_heatmap
from ..sensors.tactile import N_TOUCH_SITES, TactileConfig, touch
from ..sensors.thermal import read_temperature
from ..utils.seeding import unit_hash
from .payloads import (
    PayloadRecord,
    ambient_payload,
    impact_payload,
    object_payload,
    scene_payload,
    tactile_payload,
    temperature_payload,
)

logger = logging.getLogger("EmbodySim.environment")

CONTACT_ACTIONS = frozenset({"TOUCH", "HIT", "PICK-UP"})


@dataclass(frozen=True)
class EnvConfig:
    step_length: float = 0.25
    reach: float = 0.8
    look_radius: float = 2.0
    max_steps: int = 64
    touch_force: float = 1.0
    hit_force: float = 1.0
    sample_rate: int = 16000
    duration: float = 0.5
    point_cloud_size: int = 256
    heatmap_width: int = 64
    heatmap_height: int = 64
    tactile: TactileConfig = TactileConfig()

    @classmethod
    def from_dicts(
        cls,
        environment: Optional[Dict[str, Any]] = None,
        sensors: Optional[Dict[str, Any]] = None,
    ) -> "EnvConfig":
        values = {}
        known = cls.__dataclass_fields__
        for source in (environment or {}, sensors or {}):
            values.update({k: v for k, v in source.items() if k in known})
        values.pop("tactile", None)
        return cls(tactile=TactileConfig.from_dict(sensors or {}), **values)

    def to_dict(self) -> Dict[str, Any]:
        return asdict(self)

    @classmethod
    def from_dict(cls, raw: Dict[str, Any]) -> "EnvConfig":
        """Inverse of ``to_dict``; unknown keys are ignored."""
        values = {k: v for k, v in raw.items() if k in cls.__dataclass_fields__}
        tactile = TactileConfig(**values.pop("tactile", {}))
        return cls(tactile=tactile, **values)


@dataclass
class AgentState:
    position: Vec3
    selected: Optional[int] = None
    held: Optional[int] = None
    step_count: int = 0


@dataclass(frozen=True)
class Observation:
    state_token: str
    payload: PayloadRecord
    object_id: Optional[int]


@dataclass(frozen=True)
class ActionCall:
    """An action token with its resolved arguments."""

    name: str
    object_id: Optional[int] = None
    site: Optional[int] = None
    force: Optional[float] = None
    words: Tuple[str, ...] = ()

    def to_dict(self) -> Dict[str, Any]:
        data: Dict[str, Any] = {"name": self.name}
        for key in ("object_id", "site", "force"):
            value = getattr(self, key)
            if value is not None:
                data[key] = value
        if self.words:
            data["words"] = list(self.words)
        return data

    @classmethod
    def from_dict(cls, raw: Dict[str, Any]) -> "ActionCall":
        return cls(
            name=raw["name"],
            object_id=raw.get("object_id"),
            site=raw.get("site"),
            force=raw.get("force"),
            words=tuple(raw.get("words", ())),
        )


@lru_cache(maxsize=1)
def default_params() -> AdapterParams:
    return AdapterParams.identity()


def canonical_site(object_seed: int, action: str, n_sites: int) -> int:
    """Site used when the policy does not name one; fixed per (object, action)."""
    return int(unit_hash(object_seed, action, "site") * n_sites)


class Environment:
    """One scene, one agent, one token stream.

    Not thread-safe; run one instance per episode.
    """

    def __init__(
        self,
        scene: Scene,
        config: Optional[EnvConfig] = None,
        params: Optional[AdapterParams] = None,
        validate: bool = True,
    ):
        if validate:
            report = validate_scene(scene)
            if not report.ok:
                raise SceneValidationError(
                    "; ".join(str(v) for v in report.violations[:3])
                )
        self.initial_scene = scene
        self.config = config or EnvConfig()
        self.params = params
        self.reset()

    # -- state ---------------------------------------------------------

    def reset(self, prompt: str = "") -> List[Token]:
        """Put the agent at the room center and frame the scene.

        The stream starts with the prompt words, then one SCENE span (the
        O x 1024 object features) and one AMBIENT_SOUND span per sounding
        object in id order.

        Returns:
            The framing tokens (prompt excluded)
        """
        scene = self.initial_scene
        room = scene.room_extents
        self.scene = scene
        self.agent = AgentState(position=(room.center[0], room.center[1], 0.0))
        self.protocol: ProtocolState = INITIAL
        self.stream: List[Token] = []
        self.payloads: Dict[str, PayloadRecord] = {}
        self.calls: List[ActionCall] = []
        # free policy text, keyed by the number of calls made before it
        self.texts: List[Tuple[int, str]] = []
        self._next_ref = 0
        self.features = scene_features(scene)
        self._append(words(prompt))

        start = len(self.stream)
        self._emit_span("SCENE", scene_payload(scene, self.features))
        for obj in scene.sounding_objects:
            self._emit_span("AMBIENT_SOUND", ambient_payload(obj))
        logger.debug(
            f"Reset {scene.id}: {len(scene.objects)} objects, "
            f"{len(scene.sounding_objects)} ambient sounds"
        )
        return self.stream[start:]

    @property
    def action_count(self) -> int:
        return len(self.calls)

    def _append(self, tokens: Sequence[Token]):
        for token in tokens:
            self.protocol = step(self.protocol, token)
            self.stream.append(token)

    def _emit_span(self, state: str, record: PayloadRecord) -> Observation:
        ref = f"p{self._next_ref}"
        self._next_ref += 1
        self.payloads[ref] = record
        self._append(span(state, ref))
        return Observation(
            state_token=state, payload=record, object_id=record.object_id
        )

    def append_text(self, text: str) -> List[Token]:
        tokens = words(text)
        self._append(tokens)
        return tokens

    def _note_text(self, word: str):
        position = len(self.calls)
        if self.texts and self.texts[-1][0] == position:
            self.texts[-1] = (position, f"{self.texts[-1][1]} {word}")
        else:
            self.texts.append((position, word))

    # -- actions -------------------------------------------------------

    def _target(self, call: ActionCall) -> int:
        object_id = call.object_id
        if object_id is None:
            object_id = self.agent.selected
        if object_id is None:
            raise ProtocolError(Rule.NO_OBJECT_SELECTED)
        if not 0 <= object_id < len(self.scene.objects):
            raise ActionError(f"unknown object {object_id}")
        return object_id

    def _check_reach(self, object_id: int, action: str):
        if self.agent.held == object_id:
            return
        distance = self.scene.object(object_id).bbox.distance_to(self.agent.position)
        if distance > self.config.reach + 1e-9:
            raise ActionError(
                f"out of reach: {action} on object {object_id} at {distance:.2f} m "
                f"(reach {self.config.reach} m)"
            )

    def resolve_select(self, text_words: Sequence[str]) -> int:
        """Object id named by the words following a SELECT token."""
        text = " ".join(text_words)
        if not content_words(text):
            raise ActionError(f"SELECT names no object: {text!r}")
        params = self.params or default_params()
        return select_object(params, encode_text(text), self.features)

    def execute(self, call: ActionCall) -> List[Observation]:
        """Run one action and append its token and observation spans.

        SELECT words are appended after the token; ``call.object_id`` (if
        set) overrides head-based resolution.

        Returns:
            Observations in the order their spans were appended

        Raises:
            ProtocolError: The automaton rejects the action here
            ActionError: Out of reach, unknown object or not portable
        """
        name = call.name
        next_state = step(self.protocol, Token.action(name))
        if name == "SELECT":
            object_id = call.object_id
            if object_id is None:
                object_id = self.resolve_select(call.words)
            elif not 0 <= object_id < len(self.scene.objects):
                raise ActionError(f"unknown object {object_id}")
            self._append([Token.action(name)])
            self._append(words(" ".join(call.words)))
            self.protocol = resolve(self.protocol, object_id)
            self.agent.selected = object_id
            self.calls.append(replace(call, object_id=object_id))
            return []

        if name in ("NAVIGATE", "OBSERVE", "TOUCH", "HIT", "PICK-UP"):
            object_id = self._target(call)
        elif name == "PUT-DOWN":
            object_id = self.agent.held
        else:
            object_id = None
        if name in CONTACT_ACTIONS:
            self._check_reach(object_id, name)
        if name == "PICK-UP" and not self.scene.object(object_id).portable:
            raise ActionError(f"object {object_id} is not portable")

        self.protocol = next_state
        self.stream.append(Token.action(name))
        handler = getattr(self, f"_do_{name.lower().replace('-', '_')}")
        observations = handler(object_id, call)
        self.calls.append(self._recorded(call, object_id, observations))
        return observations

    def _recorded(self, call: ActionCall, object_id, observations) -> ActionCall:
        site = call.site
        for obs in observations:
            meta = obs.payload.meta
            site = meta.get("contact_point", meta.get("strike_point", site))
        return replace(call, object_id=object_id, site=site)

    def _do_navigate(self, object_id: int, call: ActionCall) -> List[Observation]:
        box = self.scene.object(object_id).bbox
        start = np.array(self.agent.position[:2])
        face = np.array(box.closest_point(self.agent.position)[:2])
        distance = float(np.linalg.norm(face - start))
        if distance > 0:
            steps = math.ceil(distance / self.config.step_length - 1e-9)
            self.agent.step_count += steps
            self._move_agent((float(face[0]), float(face[1]), 0.0))
        return []

    def _move_agent(self, position: Vec3):
        room = self.scene.room_extents
        position = tuple(
            min(max(p, lo), hi) for p, lo, hi in zip(position, room.low, room.high)
        )
        self.agent.position = position
        if self.agent.held is not None:
            self._carry(self.agent.held)

    def _carry(self, object_id: int):
        obj = self.scene.object(object_id)
        x, y, _ = self.agent.position
        center = self._clamped_center((x, y, obj.bbox.half[2]), obj.bbox.half)
        moved = replace(obj, bbox=obj.bbox.moved_to(center))
        self.scene = self.scene.with_object(moved)

    def _clamped_center(self, center, half) -> Vec3:
        room = self.scene.room_extents
        return tuple(
            min(max(c, lo + h), hi - h)
            for c, h, lo, hi in zip(center, half, room.low, room.high)
        )

    def _do_observe(self, object_id: int, call: ActionCall) -> List[Observation]:
        obj = self.scene.object(object_id)
        cloud = observe(obj, self.config.point_cloud_size, seed=0)
        feature = encode(Modality.POINT_CLOUD, cloud)
        return [self._emit_span("OBJECT", object_payload(obj, feature, cloud))]

    def _do_touch(self, object_id: int, call: ActionCall) -> List[Observation]:
        obj = self.scene.object(object_id)
        site = call.site
        if site is None:
            site = canonical_site(obj.seed, "TOUCH", N_TOUCH_SITES)
        force = call.force if call.force is not None else self.config.touch_force
        reading = touch(obj, site, force, self.config.tactile)
        heatmap = render_tactile_heatmap(
            reading, self.config.heatmap_width, self.config.heatmap_height
        )
        return [
            self._emit_span("TACTILE", tactile_payload(obj, reading, heatmap)),
            self._emit_span(
                "TEMPERATURE", temperature_payload(obj, read_temperature(obj).celsius)
            ),
        ]

    def _do_hit(self, object_id: int, call: ActionCall) -> List[Observation]:
        obj = self.scene.object(object_id)
        site = call.site
        if site is None:
            site = canonical_site(obj.seed, "HIT", N_STRIKE_SITES)
        force = call.force if call.force is not None else self.config.hit_force
        clip = hit(obj, site, force, self.config.sample_rate, self.config.duration)
        return [self._emit_span("IMPACT_SOUND", impact_payload(obj, clip))]

    def _do_pick_up(self, object_id: int, call: ActionCall) -> List[Observation]:
        self.agent.held = object_id
        self._carry(object_id)
        return []

    def _do_put_down(self, object_id: int, call: ActionCall) -> List[Observation]:
        obj = self.scene.object(object_id)
        x, y, _ = self.agent.position
        center = self._clamped_center((x, y, obj.bbox.half[2]), obj.bbox.half)
        moved = replace(obj, bbox=obj.bbox.moved_to(center))
        self.scene = self.scene.with_object(moved)
        self.agent.held = None
        return []

    def _do_look_around(self, object_id, call: ActionCall) -> List[Observation]:
        observations = []
        for obj in self.scene.objects:
            if obj.id == self.agent.held:
                continue
            if obj.bbox.distance_to(self.agent.position) <= self.config.look_radius:
                record = object_payload(obj, encode_visual(obj))
                observations.append(self._emit_span("OBJECT", record))
        return observations

    # -- token-level driving --------------------------------------------

    def feed(
        self,
        tokens: Sequence[Token],
        args: Optional[Sequence[Optional[dict]]] = None,
    ) -> List[Token]:
        """Consume policy tokens: text is appended, actions are executed.

        Words after a SELECT token name its referent and are resolved when
        the next action or the end of the chunk is reached. ``args[i]``
        holds explicit arguments (object_id, site, force) for the i-th
        action token of the chunk.

        Returns:
            Every token appended to the stream for this chunk
        """
        start = len(self.stream)
        args = list(args or [])
        pending: Optional[ActionCall] = None
        action_index = 0

        def flush():
            nonlocal pending
            if pending is not None:
                call, pending = pending, None
                self.execute(call)

        for token in tokens:
            if token.kind is TokenKind.TEXT:
                if pending is not None:
                    pending = replace(pending, words=pending.words + (token.value,))
                else:
                    self._append([token])
                    self._note_text(token.value)
                continue
            if token.kind is not TokenKind.ACTION:
                raise ActionError(
                    f"state token {token.render()} cannot come from a policy"
                )
            flush()
            extra = args[action_index] if action_index < len(args) else None
            action_index += 1
            call = ActionCall(
                name=token.value,
                object_id=(extra or {}).get("object_id"),
                site=(extra or {}).get("site"),
                force=(extra or {}).get("force"),
            )
            if call.name == "SELECT":
                step(self.protocol, token)
                pending = call
            else:
                self.execute(call)
        flush()
        return self.stream[start:]

    def check_complete(self):
        check_complete(self.protocol)
