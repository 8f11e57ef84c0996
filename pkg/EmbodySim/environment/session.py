"""Wire-message handling for one policy session, and the in-process loop."""

import logging
from dataclasses import dataclass
from typing import Any, Callable, Dict, List, Optional, Protocol

from ..errors import ActionError, ProtocolError, WireError
from ..protocol.automaton import terminate
from ..protocol.tokens import TokenKind
from ..protocol.wire import Message, error_message, hello_ack
from .episode import Episode, finish_episode
from .runtime import Environment

logger = logging.getLogger("EmbodySim.environment")


@dataclass
class EpisodeSetup:
    """What a reset produces: a fresh environment and the task prompt."""

    env: Environment
    prompt: str = ""
    episode_id: str = "episode-0"
    task: Optional[Dict[str, Any]] = None


World = Callable[[Dict[str, Any]], EpisodeSetup]


class Policy(Protocol):
    def act(self, update: Message) -> Message:
        """Answer a state update with emit_tokens or episode_end."""


class Session:
    """Serves one policy: reset, token chunks, episode end.

    Messages must be handed to ``handle`` in arrival order from a single
    thread. Finished episodes are passed to ``on_episode``.
    """

    def __init__(
        self,
        session_id: str,
        world: World,
        max_steps: int = 64,
        on_episode: Optional[Callable[[Episode], None]] = None,
    ):
        if max_steps < 1:
            raise ValueError(f"max_steps must be >= 1, got {max_steps}")
        self.session_id = session_id
        self.world = world
        self.max_steps = max_steps
        self.on_episode = on_episode
        self.setup: Optional[EpisodeSetup] = None
        self.episodes: List[Episode] = []

    @property
    def active(self) -> bool:
        return self.setup is not None

    def handle(self, message: Message) -> Message:
        try:
            if message.op == "hello":
                return hello_ack(self.session_id)
            if message.op == "reset":
                return self._reset(message.body or {})
            if message.op == "emit_tokens":
                return self._emit(message)
            if message.op == "episode_end":
                return self._end(message.body or {})
            raise WireError("unexpected_op", f"clients do not send {message.op}")
        except WireError as e:
            return error_message(e, self.session_id)

    def _update(self, tokens, body: Dict[str, Any]) -> Message:
        env = self.setup.env
        refs = [t.value for t in tokens if t.kind is TokenKind.PAYLOAD_REF]
        return Message(
            op="state_update",
            session=self.session_id,
            tokens=[t.render() for t in tokens],
            payloads={ref: env.payloads[ref].to_dict() for ref in refs},
            body=body,
        )

    def _reset(self, body: Dict[str, Any]) -> Message:
        if self.active:
            self.finish(status="aborted", error="reset before episode_end")
        try:
            setup = self.world(body)
        except Exception as e:
            logger.error(f"Session {self.session_id} reset failed: {e}", exc_info=True)
            raise WireError("reset_failed", str(e)) from e
        self.setup = setup
        setup.env.reset(setup.prompt)
        scene = setup.env.scene
        logger.info(
            f"Session {self.session_id} started {setup.episode_id} on {scene.id}"
        )
        return self._update(
            setup.env.stream,
            {
                "episode_id": setup.episode_id,
                "scene_id": scene.id,
                "n_objects": len(scene.objects),
                "prompt": setup.prompt,
                "max_steps": self.max_steps,
            },
        )

    def _emit(self, message: Message) -> Message:
        if not self.active:
            raise WireError("no_episode", "send reset first")
        env = self.setup.env
        tokens = message.token_list()
        args = (message.body or {}).get("args")
        try:
            new = env.feed(tokens, args)
        except ProtocolError as e:
            env.protocol = terminate(env.protocol)
            episode = self.finish(
                status="error", error=str(e), error_at=len(env.stream)
            )
            return Message(
                op="error",
                session=self.session_id,
                body={
                    "code": "protocol",
                    "message": str(e),
                    "rule": e.rule.name,
                    "at": episode.error_at,
                    "episode_id": episode.episode_id,
                    "echo": "",
                },
            )
        except ActionError as e:
            logger.info(f"Session {self.session_id}: action refused: {e}")
            return error_message(WireError("action", str(e)), self.session_id)
        if env.action_count >= self.max_steps:
            episode = self.finish(status="aborted", error="max steps reached")
            return self._end_message(episode)
        return self._update(
            new,
            {
                "selected": env.agent.selected,
                "held": env.agent.held,
                "actions": env.action_count,
            },
        )

    def _end(self, body: Dict[str, Any]) -> Message:
        if not self.active:
            raise WireError("no_episode", "send reset first")
        episode = self.finish(
            answer=str(body.get("answer", "")), chosen_object=body.get("object_id")
        )
        return self._end_message(episode)

    def _end_message(self, episode: Episode) -> Message:
        return Message(
            op="episode_end",
            session=self.session_id,
            body={
                "episode_id": episode.episode_id,
                "status": episode.status,
                "actions": len(episode.calls),
                "steps": episode.steps,
            },
        )

    def finish(
        self, answer: str = "", status: str = "ok", error=None, **extra
    ) -> Episode:
        """Close the running episode and hand it to ``on_episode``."""
        setup, self.setup = self.setup, None
        episode = finish_episode(
            setup.env,
            setup.episode_id,
            prompt=setup.prompt,
            answer=answer,
            status=status,
            error=error,
            task=setup.task,
            **extra,
        )
        self.episodes.append(episode)
        logger.info(
            f"Session {self.session_id} finished {episode.episode_id}: {status}"
        )
        if self.on_episode is not None:
            self.on_episode(episode)
        return episode

    def close(self):
        """Transport went away: a running episode is recorded as aborted."""
        if self.active:
            self.finish(status="aborted", error="transport closed")


def run_episode(
    env: Environment,
    policy: Policy,
    max_steps: int = 64,
    prompt: str = "",
    episode_id: str = "episode-0",
) -> Episode:
    """Drive a policy against an environment until it answers.

    Args:
        env: Environment owned by this call
        policy: Object with ``act(update) -> Message``
        max_steps: Maximum number of executed actions, >= 1
        prompt: Task prompt placed before the scene framing
        episode_id: Id recorded in the episode

    Returns:
        The recorded Episode (status aborted on transport loss)
    """
    setup = EpisodeSetup(env=env, prompt=prompt, episode_id=episode_id)
    session = Session("local", lambda body: setup, max_steps=max_steps)
    update = session.handle(Message(op="reset", session="local"))
    rounds = 0
    while session.active:
        rounds += 1
        if rounds > 4 * max_steps + 8:
            session.finish(status="aborted", error="policy never ended the episode")
            break
        try:
            reply = policy.act(update)
        except (ConnectionError, EOFError) as e:
            logger.warning(f"Policy connection lost in {episode_id}: {e}")
            session.finish(status="aborted", error=f"transport lost: {e}")
            break
        reply.session = "local"
        update = session.handle(reply)
    return session.episodes[-1]
