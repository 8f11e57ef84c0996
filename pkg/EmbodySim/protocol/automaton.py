"""Legality automaton over action/state tokens."""

import enum
from dataclasses import dataclass, replace
from typing import Iterable, Optional

from ..errors import ProtocolError
from .tokens import OBJECT_ACTIONS, Token, TokenKind


class Rule(enum.Enum):
    """Every grammar or legality rule a token can violate."""

    SCENE_NOT_FRAMED = "scene not framed"
    SCENE_ALREADY_FRAMED = "scene already framed"
    NO_OBJECT_SELECTED = "no object selected"
    ALREADY_HOLDING = "already holding"
    EMPTY_HAND = "empty hand"
    ACTION_INSIDE_SPAN = "action inside state span"
    TEXT_INSIDE_SPAN = "text inside state span"
    NESTED_SPAN = "nested state span"
    UNMATCHED_CLOSE = "unmatched close"
    MISMATCHED_CLOSE = "mismatched close"
    EMPTY_SPAN = "empty state span"
    MULTIPLE_PAYLOADS = "multiple payloads in span"
    PAYLOAD_OUTSIDE_SPAN = "payload ref outside a span"
    UNCLOSED = "unclosed"
    UNKNOWN_TOKEN = "unknown token"
    EPISODE_TERMINATED = "episode terminated"

    @property
    def message(self) -> str:
        return self.value


class Phase(enum.Enum):
    AWAIT_SCENE = "AwaitScene"
    IDLE = "Idle"
    SELECTED = "Selected"
    HOLDING = "Holding+Selected"
    TERMINATED = "Terminated"


@dataclass(frozen=True)
class ProtocolState:
    """Where a token stream stands.

    ``selected`` is true from the first SELECT on; ``selected_object`` stays
    None until the environment resolves the referent.
    """

    scene_framed: bool = False
    selected: bool = False
    selected_object: Optional[int] = None
    holding: bool = False
    held_object: Optional[int] = None
    open_span: Optional[str] = None
    span_payloads: int = 0
    terminated: bool = False

    @property
    def phase(self) -> Phase:
        if self.terminated:
            return Phase.TERMINATED
        if not self.scene_framed:
            return Phase.AWAIT_SCENE
        if self.holding:
            return Phase.HOLDING
        if self.selected:
            return Phase.SELECTED
        return Phase.IDLE

    @property
    def selection_pending(self) -> bool:
        return self.selected and self.selected_object is None


INITIAL = ProtocolState()


def _in_span(state: ProtocolState, token: Token) -> ProtocolState:
    kind = token.kind
    if kind is TokenKind.PAYLOAD_REF:
        if state.span_payloads:
            raise ProtocolError(Rule.MULTIPLE_PAYLOADS, state.open_span)
        return replace(state, span_payloads=1)
    if kind is TokenKind.STATE_CLOSE:
        if token.value != state.open_span:
            raise ProtocolError(Rule.MISMATCHED_CLOSE, token.value)
        if not state.span_payloads:
            raise ProtocolError(Rule.EMPTY_SPAN, token.value)
        framed = state.scene_framed or token.value == "SCENE"
        return replace(state, open_span=None, span_payloads=0, scene_framed=framed)
    if kind is TokenKind.STATE_OPEN:
        raise ProtocolError(Rule.NESTED_SPAN, token.value)
    if kind is TokenKind.ACTION:
        raise ProtocolError(Rule.ACTION_INSIDE_SPAN, token.value)
    raise ProtocolError(Rule.TEXT_INSIDE_SPAN, state.open_span)


def _action(state: ProtocolState, name: str) -> ProtocolState:
    if not state.scene_framed:
        raise ProtocolError(Rule.SCENE_NOT_FRAMED)
    if name == "SELECT":
        return replace(state, selected=True, selected_object=None)
    if name == "PUT-DOWN":
        if not state.holding:
            raise ProtocolError(Rule.EMPTY_HAND)
        return replace(state, holding=False, held_object=None)
    if name in OBJECT_ACTIONS:
        if not state.selected:
            raise ProtocolError(Rule.NO_OBJECT_SELECTED)
        if name == "PICK-UP":
            if state.holding:
                raise ProtocolError(Rule.ALREADY_HOLDING)
            return replace(state, holding=True, held_object=state.selected_object)
    return state


def step(state: ProtocolState, token: Token) -> ProtocolState:
    """Advance the automaton by one token.

    Args:
        state: Current state
        token: Next token of the stream

    Returns:
        The next state; states are immutable

    Raises:
        ProtocolError: The token is illegal here; ``error.rule`` names the rule
    """
    if state.terminated:
        raise ProtocolError(Rule.EPISODE_TERMINATED)
    if state.open_span is not None:
        return _in_span(state, token)

    kind = token.kind
    if kind is TokenKind.TEXT:
        return state
    if kind is TokenKind.ACTION:
        return _action(state, token.value)
    if kind is TokenKind.PAYLOAD_REF:
        raise ProtocolError(Rule.PAYLOAD_OUTSIDE_SPAN)
    if kind is TokenKind.STATE_CLOSE:
        raise ProtocolError(Rule.UNMATCHED_CLOSE, token.value)
    if token.value == "SCENE":
        if state.scene_framed:
            raise ProtocolError(Rule.SCENE_ALREADY_FRAMED)
    elif not state.scene_framed:
        raise ProtocolError(Rule.SCENE_NOT_FRAMED)
    return replace(state, open_span=token.value, span_payloads=0)


def resolve(state: ProtocolState, object_id: int) -> ProtocolState:
    """Bind the pending SELECT to an object id."""
    if not state.selected:
        raise ProtocolError(Rule.NO_OBJECT_SELECTED)
    held = state.held_object
    if state.holding and held is None:
        held = object_id
    return replace(state, selected_object=object_id, held_object=held)


def terminate(state: ProtocolState) -> ProtocolState:
    return replace(state, terminated=True)


def check_complete(state: ProtocolState):
    """Raise if the stream stopped inside a state span."""
    if state.open_span is not None:
        raise ProtocolError(Rule.UNCLOSED, state.open_span)


def replay(
    tokens: Iterable[Token],
    state: ProtocolState = INITIAL,
    complete: bool = True,
) -> ProtocolState:
    """Fold ``step`` over a stream; errors carry the offending token index.

    When ``complete`` is set an open span at the end is reported at index
    ``len(tokens)``.
    """
    count = 0
    for index, token in enumerate(tokens):
        try:
            state = step(state, token)
        except ProtocolError as e:
            raise ProtocolError(e.rule, e.detail, index) from None
        count = index + 1
    if complete:
        try:
            check_complete(state)
        except ProtocolError as e:
            raise ProtocolError(e.rule, e.detail, count) from None
    return state
