"""Episode records and deterministic re-execution."""

import logging
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional, Tuple

from ..errors import DatasetError, EmbodySimError
from ..protocol.parser import parse, serialize
from ..protocol.tokens import TokenKind, TokenStream
from ..scene.model import Scene
from .payloads import PayloadRecord
from .runtime import ActionCall, EnvConfig, Environment

logger = logging.getLogger("EmbodySim.environment")

STATUSES = ("ok", "invalid", "aborted", "error")


@dataclass
class Episode:
    """Complete interleaved record of one task.

    ``stream`` holds the prompt, the scene framing, every action with its
    observation spans and finally the answer words, which start at
    ``answer_start``. ``calls`` and ``texts`` together are the policy's
    transcript: ``texts`` holds free words as (calls made before, text).
    ``error_at`` is the stream index of a rejected token.
    """

    episode_id: str
    scene_id: str
    prompt: str
    stream: TokenStream
    calls: List[ActionCall]
    payloads: Dict[str, PayloadRecord]
    answer: str = ""
    answer_start: int = 0
    status: str = "ok"
    error: Optional[str] = None
    steps: int = 0
    chosen_object: Optional[int] = None
    task: Optional[Dict[str, Any]] = None
    slots: Dict[str, Dict[str, Any]] = field(default_factory=dict)
    texts: List[Tuple[int, str]] = field(default_factory=list)
    error_at: Optional[int] = None
    environment: Optional[Dict[str, Any]] = None

    @property
    def ok(self) -> bool:
        return self.status == "ok"

    def action_indices(self) -> List[int]:
        return [i for i, t in enumerate(self.stream) if t.kind is TokenKind.ACTION]

    def to_dict(self) -> Dict[str, Any]:
        return {
            "episode_id": self.episode_id,
            "scene_id": self.scene_id,
            "prompt": self.prompt,
            "stream": serialize(self.stream),
            "calls": [c.to_dict() for c in self.calls],
            "payloads": {
                ref: rec.to_dict() for ref, rec in sorted(self.payloads.items())
            },
            "answer": self.answer,
            "answer_start": self.answer_start,
            "status": self.status,
            "error": self.error,
            "steps": self.steps,
            "chosen_object": self.chosen_object,
            "task": self.task,
            "slots": self.slots,
            "texts": [[position, text] for position, text in self.texts],
            "error_at": self.error_at,
            "environment": self.environment,
        }

    @classmethod
    def from_dict(cls, raw: Dict[str, Any]) -> "Episode":
        try:
            return cls(
                episode_id=raw["episode_id"],
                scene_id=raw["scene_id"],
                prompt=raw.get("prompt", ""),
                stream=parse(raw["stream"]),
                calls=[ActionCall.from_dict(c) for c in raw.get("calls", [])],
                payloads={
                    ref: PayloadRecord.from_dict(rec)
                    for ref, rec in raw.get("payloads", {}).items()
                },
                answer=raw.get("answer", ""),
                answer_start=int(raw.get("answer_start", 0)),
                status=raw.get("status", "ok"),
                error=raw.get("error"),
                steps=int(raw.get("steps", 0)),
                chosen_object=raw.get("chosen_object"),
                task=raw.get("task"),
                slots=dict(raw.get("slots", {})),
                texts=[(int(p), str(t)) for p, t in raw.get("texts", [])],
                error_at=raw.get("error_at"),
                environment=raw.get("environment"),
            )
        except EmbodySimError:
            raise
        except (KeyError, TypeError, ValueError) as e:
            raise DatasetError(f"malformed episode record: {e}") from e


def finish_episode(
    env: Environment,
    episode_id: str,
    prompt: str = "",
    answer: str = "",
    status: str = "ok",
    error: Optional[str] = None,
    **extra,
) -> Episode:
    """Append the answer words and snapshot the environment as an Episode."""
    if status not in STATUSES:
        raise ValueError(f"unknown episode status {status!r}")
    answer_start = len(env.stream)
    if answer:
        env.append_text(answer)
    return Episode(
        episode_id=episode_id,
        scene_id=env.initial_scene.id,
        prompt=prompt,
        stream=TokenStream(tuple(env.stream)),
        calls=list(env.calls),
        texts=list(env.texts),
        environment=env.config.to_dict(),
        payloads=dict(env.payloads),
        answer=answer,
        answer_start=answer_start,
        status=status,
        error=error,
        steps=env.agent.step_count,
        **extra,
    )


def replay_actions(
    scene: Scene,
    episode: Episode,
    config: Optional[EnvConfig] = None,
) -> List[str]:
    """Re-execute the recorded transcript and list every difference.

    Without ``config`` the episode's recorded environment config is used.

    Returns:
        Human-readable differences; empty when the replay reproduces the
        recorded stream and payloads bit for bit
    """
    if config is None and episode.environment is not None:
        config = EnvConfig.from_dict(episode.environment)
    env = Environment(scene, config, validate=False)
    env.reset(episode.prompt)
    texts = list(episode.texts)

    def replay_texts(position: int):
        while texts and texts[0][0] == position:
            env.append_text(texts.pop(0)[1])

    diff: List[str] = []
    for index, call in enumerate(episode.calls):
        replay_texts(index)
        try:
            env.execute(call)
        except EmbodySimError as e:
            diff.append(f"call {index} ({call.name}) failed on replay: {e}")
            return diff
    replay_texts(len(episode.calls))
    if episode.answer:
        env.append_text(episode.answer)

    recorded = episode.stream.render()
    replayed = [t.render() for t in env.stream]
    if recorded != replayed:
        first = next(
            (i for i, (a, b) in enumerate(zip(recorded, replayed)) if a != b),
            min(len(recorded), len(replayed)),
        )
        diff.append(f"stream differs at token {first}")
    for ref in sorted(set(episode.payloads) | set(env.payloads)):
        old, new = episode.payloads.get(ref), env.payloads.get(ref)
        if old is None or new is None:
            diff.append(f"{ref}: present in only one run")
        elif old != new:
            changed = sorted(
                name
                for name in set(old.blobs) | set(new.blobs)
                if old.blobs.get(name) != new.blobs.get(name)
            )
            what = f"blobs {changed}" if changed else "meta"
            diff.append(f"{ref}: {old.kind} {what} differ")
    if diff:
        logger.warning(f"Replay of {episode.episode_id} differs: {diff[:3]}")
    return diff
