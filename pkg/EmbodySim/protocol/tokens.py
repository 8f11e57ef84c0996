"""Token types of the action/state stream."""

import enum
import re
from dataclasses import dataclass
from typing import Iterable, Iterator, List, Tuple, Union

ACTIONS: Tuple[str, ...] = (
    "SELECT",
    "NAVIGATE",
    "OBSERVE",
    "TOUCH",
    "HIT",
    "PICK-UP",
    "PUT-DOWN",
    "LOOK-AROUND",
)
STATES: Tuple[str, ...] = (
    "SCENE",
    "AMBIENT_SOUND",
    "OBJECT",
    "IMPACT_SOUND",
    "TACTILE",
    "TEMPERATURE",
)
# Actions that act on the selected object.
OBJECT_ACTIONS = frozenset({"NAVIGATE", "OBSERVE", "TOUCH", "HIT", "PICK-UP"})

PAYLOAD_ID = re.compile(r"^[A-Za-z0-9_.\-]+$")


class TokenKind(enum.Enum):
    TEXT = "text"
    ACTION = "action"
    STATE_OPEN = "state_open"
    STATE_CLOSE = "state_close"
    PAYLOAD_REF = "payload_ref"


@dataclass(frozen=True)
class Token:
    kind: TokenKind
    value: str

    @classmethod
    def text(cls, word: str) -> "Token":
        return cls(TokenKind.TEXT, word)

    @classmethod
    def action(cls, name: str) -> "Token":
        if name not in ACTIONS:
            raise ValueError(f"unknown action {name}")
        return cls(TokenKind.ACTION, name)

    @classmethod
    def open(cls, name: str) -> "Token":
        if name not in STATES:
            raise ValueError(f"unknown state {name}")
        return cls(TokenKind.STATE_OPEN, name)

    @classmethod
    def close(cls, name: str) -> "Token":
        if name not in STATES:
            raise ValueError(f"unknown state {name}")
        return cls(TokenKind.STATE_CLOSE, name)

    @classmethod
    def ref(cls, payload_id: str) -> "Token":
        if not PAYLOAD_ID.match(payload_id):
            raise ValueError(f"invalid payload id {payload_id!r}")
        return cls(TokenKind.PAYLOAD_REF, payload_id)

    @property
    def is_action(self) -> bool:
        return self.kind is TokenKind.ACTION

    def render(self) -> str:
        if self.kind is TokenKind.ACTION or self.kind is TokenKind.STATE_OPEN:
            return f"<{self.value}>"
        if self.kind is TokenKind.STATE_CLOSE:
            return f"</{self.value}>"
        if self.kind is TokenKind.PAYLOAD_REF:
            return f"#{self.value}"
        return self.value

    def __str__(self) -> str:
        return self.render()


@dataclass(frozen=True)
class TokenStream:
    """An ordered, immutable sequence of tokens."""

    tokens: Tuple[Token, ...] = ()

    @classmethod
    def of(cls, tokens: Iterable[Token]) -> "TokenStream":
        return cls(tuple(tokens))

    def __iter__(self) -> Iterator[Token]:
        return iter(self.tokens)

    def __len__(self) -> int:
        return len(self.tokens)

    def __getitem__(self, index):
        if isinstance(index, slice):
            return TokenStream(self.tokens[index])
        return self.tokens[index]

    def __add__(self, other: Union["TokenStream", Iterable[Token]]) -> "TokenStream":
        return TokenStream(self.tokens + tuple(other))

    def actions(self) -> List[Tuple[int, Token]]:
        return [(i, t) for i, t in enumerate(self.tokens) if t.is_action]

    def payload_refs(self) -> List[str]:
        return [t.value for t in self.tokens if t.kind is TokenKind.PAYLOAD_REF]

    def render(self) -> List[str]:
        return [t.render() for t in self.tokens]


def span(state: str, payload_id: str) -> List[Token]:
    """``<STATE> #id </STATE>``"""
    return [Token.open(state), Token.ref(payload_id), Token.close(state)]


def words(text: str) -> List[Token]:
    return [Token.text(w) for w in text.split()]
