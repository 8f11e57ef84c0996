"""Whole-stream validator.

Written as a single scan over the stream, separately from the automaton in
``automaton.py``; the test suite checks that the two agree on every action
sequence up to length six.
"""

from dataclasses import dataclass
from typing import Optional, Sequence

from .automaton import Rule
from .tokens import OBJECT_ACTIONS, Token, TokenKind


@dataclass(frozen=True)
class StreamViolation:
    rule: Rule
    index: int
    detail: str = ""

    def __str__(self) -> str:
        text = self.rule.message
        if self.detail:
            text = f"{text} {self.detail}"
        return f"{text} (token {self.index})"


def validate_stream(tokens: Sequence[Token]) -> Optional[StreamViolation]:
    """Check a complete stream from its start.

    Returns:
        The first violation, or None when the stream is legal
    """
    framed = False
    has_selection = False
    in_hand = False
    span: Optional[str] = None
    refs = 0

    for i, token in enumerate(tokens):
        kind, value = token.kind, token.value

        if span is not None:
            if kind is TokenKind.PAYLOAD_REF and refs == 0:
                refs = 1
                continue
            if kind is TokenKind.PAYLOAD_REF:
                return StreamViolation(Rule.MULTIPLE_PAYLOADS, i, span)
            if kind is TokenKind.STATE_CLOSE and value == span and refs:
                framed = framed or span == "SCENE"
                span, refs = None, 0
                continue
            if kind is TokenKind.STATE_CLOSE:
                rule = Rule.MISMATCHED_CLOSE if value != span else Rule.EMPTY_SPAN
                return StreamViolation(rule, i, value)
            if kind is TokenKind.STATE_OPEN:
                return StreamViolation(Rule.NESTED_SPAN, i, value)
            if kind is TokenKind.ACTION:
                return StreamViolation(Rule.ACTION_INSIDE_SPAN, i, value)
            return StreamViolation(Rule.TEXT_INSIDE_SPAN, i, span)

        if kind is TokenKind.PAYLOAD_REF:
            return StreamViolation(Rule.PAYLOAD_OUTSIDE_SPAN, i)
        if kind is TokenKind.STATE_CLOSE:
            return StreamViolation(Rule.UNMATCHED_CLOSE, i, value)
        if kind is TokenKind.STATE_OPEN:
            if value == "SCENE" and framed:
                return StreamViolation(Rule.SCENE_ALREADY_FRAMED, i)
            if value != "SCENE" and not framed:
                return StreamViolation(Rule.SCENE_NOT_FRAMED, i)
            span = value
            continue
        if kind is TokenKind.TEXT:
            continue

        # actions
        if not framed:
            return StreamViolation(Rule.SCENE_NOT_FRAMED, i)
        if value == "SELECT":
            has_selection = True
        elif value == "PUT-DOWN":
            if not in_hand:
                return StreamViolation(Rule.EMPTY_HAND, i)
            in_hand = False
        elif value in OBJECT_ACTIONS and not has_selection:
            return StreamViolation(Rule.NO_OBJECT_SELECTED, i)
        elif value == "PICK-UP":
            if in_hand:
                return StreamViolation(Rule.ALREADY_HOLDING, i)
            in_hand = True

    if span is not None:
        return StreamViolation(Rule.UNCLOSED, len(tokens), span)
    return None


def is_valid(tokens: Sequence[Token]) -> bool:
    return validate_stream(tokens) is None
