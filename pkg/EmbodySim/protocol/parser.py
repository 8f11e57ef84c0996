"""Text form of token streams: parse and serialize."""

import re
from typing import List, Optional, Tuple

from ..errors import ParseError
from .automaton import Rule
from .tokens import ACTIONS, PAYLOAD_ID, STATES, Token, TokenKind, TokenStream

_PIECE = re.compile(r"<[^>]*>|<|[^\s<]+")


def read_token(piece: str, offset: int = 0) -> Token:
    """Classify one whitespace-free piece of text.

    Raises:
        ParseError: Unknown ``<...>`` marker or malformed payload ref
    """
    if piece.startswith("<"):
        if len(piece) < 2 or not piece.endswith(">"):
            raise ParseError(
                f"unterminated marker {piece!r}", offset, Rule.UNKNOWN_TOKEN
            )
        if piece.startswith("</"):
            name = piece[2:-1]
            if name in STATES:
                return Token(TokenKind.STATE_CLOSE, name)
        else:
            name = piece[1:-1]
            if name in ACTIONS:
                return Token(TokenKind.ACTION, name)
            if name in STATES:
                return Token(TokenKind.STATE_OPEN, name)
        raise ParseError(f"unknown token {piece}", offset, Rule.UNKNOWN_TOKEN)
    if piece.startswith("#"):
        if not PAYLOAD_ID.match(piece[1:]):
            raise ParseError(
                f"invalid payload ref {piece!r}", offset, Rule.UNKNOWN_TOKEN
            )
        return Token(TokenKind.PAYLOAD_REF, piece[1:])
    return Token(TokenKind.TEXT, piece)


def tokenize(text: str) -> List[Tuple[Token, int]]:
    """Split text into tokens paired with their byte offsets."""
    pieces = []
    for match in _PIECE.finditer(text):
        offset = len(text[: match.start()].encode("utf-8"))
        pieces.append((read_token(match.group(), offset), offset))
    return pieces


def _check_spans(pieces: List[Tuple[Token, int]], end: int):
    span: Optional[str] = None
    refs = 0
    for token, offset in pieces:
        kind = token.kind
        if span is None:
            if kind is TokenKind.STATE_OPEN:
                span, refs = token.value, 0
            elif kind is TokenKind.STATE_CLOSE:
                raise ParseError(
                    f"unmatched close {token.value}", offset, Rule.UNMATCHED_CLOSE
                )
            elif kind is TokenKind.PAYLOAD_REF:
                raise ParseError(
                    "payload ref outside a span", offset, Rule.PAYLOAD_OUTSIDE_SPAN
                )
            continue
        if kind is TokenKind.PAYLOAD_REF:
            if refs:
                raise ParseError(
                    f"multiple payloads in {span}", offset, Rule.MULTIPLE_PAYLOADS
                )
            refs = 1
        elif kind is TokenKind.STATE_CLOSE:
            if token.value != span:
                raise ParseError(
                    f"mismatched close {token.value} for {span}",
                    offset,
                    Rule.MISMATCHED_CLOSE,
                )
            if not refs:
                raise ParseError(f"empty state span {span}", offset, Rule.EMPTY_SPAN)
            span = None
        elif kind is TokenKind.STATE_OPEN:
            raise ParseError(
                f"nested state span {token.value}", offset, Rule.NESTED_SPAN
            )
        elif kind is TokenKind.ACTION:
            raise ParseError(f"action inside {span}", offset, Rule.ACTION_INSIDE_SPAN)
        else:
            raise ParseError(f"text inside {span}", offset, Rule.TEXT_INSIDE_SPAN)
    if span is not None:
        raise ParseError(f"unclosed {span}", end, Rule.UNCLOSED)


def parse(text: str) -> TokenStream:
    """Parse the text form of a token stream.

    Splits on whitespace and on marker boundaries, so ``word<TOUCH>`` yields
    two tokens. State spans must be balanced, unnested and hold exactly one
    payload ref.

    Args:
        text: Stream text

    Returns:
        TokenStream

    Raises:
        ParseError: With the byte offset of the offending token
    """
    pieces = tokenize(text)
    _check_spans(pieces, len(text.encode("utf-8")))
    return TokenStream(tuple(token for token, _ in pieces))


def serialize(stream) -> str:
    """Canonical text form: tokens joined by single spaces."""
    return " ".join(token.render() for token in stream)
