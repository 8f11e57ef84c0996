"""Newline-delimited JSON framing of protocol messages."""

import json
import logging
from dataclasses import dataclass
from typing import Any, BinaryIO, Dict, List, Optional

from ..errors import ParseError, WireError
from .parser import read_token
from .tokens import ACTIONS, STATES, Token

logger = logging.getLogger("EmbodySim.protocol")

PROTOCOL_VERSION = 1
MAX_LINE_BYTES = 16 * 1024 * 1024
ECHO_BYTES = 120

OPS = ("hello", "reset", "emit_tokens", "state_update", "episode_end", "error")
CAPABILITIES = ("tokens/v1", "payloads/base64", "explicit-args", "look-around-features")

_FIELDS = {"v", "op", "session", "tokens", "payloads", "body"}


@dataclass
class Message:
    """One wire message. Optional parts are omitted from the line when None."""

    op: str
    session: str = ""
    tokens: Optional[List[str]] = None
    payloads: Optional[Dict[str, Any]] = None
    body: Optional[Dict[str, Any]] = None
    v: int = PROTOCOL_VERSION

    def to_dict(self) -> Dict[str, Any]:
        data: Dict[str, Any] = {"v": self.v, "op": self.op, "session": self.session}
        for name in ("tokens", "payloads", "body"):
            value = getattr(self, name)
            if value is not None:
                data[name] = value
        return data

    def token_list(self) -> List[Token]:
        """The ``tokens`` field as Token objects."""
        try:
            return [read_token(text) for text in self.tokens or []]
        except ParseError as e:
            raise WireError("bad_tokens", str(e)) from e


def hello_ack(session: str = "") -> Message:
    return Message(
        op="hello",
        session=session,
        body={
            "protocol": PROTOCOL_VERSION,
            "capabilities": list(CAPABILITIES),
            "actions": list(ACTIONS),
            "states": list(STATES),
        },
    )


def error_message(error: WireError, session: str = "") -> Message:
    return Message(
        op="error",
        session=session,
        body={"code": error.code, "message": error.message, "echo": error.echo},
    )


def echo_prefix(line: bytes) -> str:
    """At most 120 bytes of the offending line, cut on a character boundary."""
    return line.rstrip(b"\r\n")[:ECHO_BYTES].decode("utf-8", errors="ignore")


def wire_encode(message: Message, max_bytes: int = MAX_LINE_BYTES) -> bytes:
    """Encode a message as one UTF-8 JSON line terminated by ``\\n``.

    Raises:
        WireError: Unknown op or the encoded line exceeds ``max_bytes``
    """
    if message.op not in OPS:
        raise WireError("unknown_op", f"unknown op {message.op!r}")
    line = json.dumps(
        message.to_dict(), sort_keys=True, separators=(",", ":"), ensure_ascii=False
    ).encode("utf-8")
    if len(line) + 1 > max_bytes:
        raise WireError("too_large", "message too large")
    return line + b"\n"


def wire_decode(line: bytes, max_bytes: int = MAX_LINE_BYTES) -> Message:
    """Decode one line (with or without its newline).

    Raises:
        WireError: With a code and an echo of the offending prefix
    """
    echo = echo_prefix(line)
    if len(line) > max_bytes:
        raise WireError("too_large", "message too large", echo)
    try:
        data = json.loads(line.decode("utf-8"))
    except UnicodeDecodeError:
        raise WireError("bad_encoding", "line is not UTF-8", echo) from None
    except json.JSONDecodeError as e:
        raise WireError("bad_json", f"invalid JSON: {e.msg}", echo) from None
    if not isinstance(data, dict):
        raise WireError("bad_message", "message must be a JSON object", echo)
    unknown = set(data) - _FIELDS
    if unknown:
        raise WireError("bad_message", f"unknown fields {sorted(unknown)}", echo)
    if data.get("v") != PROTOCOL_VERSION:
        raise WireError("bad_version", f"unsupported version {data.get('v')!r}", echo)
    op = data.get("op")
    if op not in OPS:
        raise WireError("unknown_op", f"unknown op {op!r}", echo)
    session = data.get("session", "")
    tokens = data.get("tokens")
    payloads = data.get("payloads")
    body = data.get("body")
    if not isinstance(session, str):
        raise WireError("bad_message", "session must be a string", echo)
    if tokens is not None and not (
        isinstance(tokens, list) and all(isinstance(t, str) for t in tokens)
    ):
        raise WireError("bad_message", "tokens must be a list of strings", echo)
    if payloads is not None and not isinstance(payloads, dict):
        raise WireError("bad_message", "payloads must be an object", echo)
    if body is not None and not isinstance(body, dict):
        raise WireError("bad_message", "body must be an object", echo)
    return Message(op=op, session=session, tokens=tokens, payloads=payloads, body=body)


def read_line(stream: BinaryIO, max_bytes: int = MAX_LINE_BYTES) -> Optional[bytes]:
    """Read one line, or None at end of stream.

    An oversize line is consumed up to its newline before WireError is
    raised, so the next call starts on a fresh line.
    """
    line = stream.readline(max_bytes + 1)
    if not line:
        return None
    if len(line) > max_bytes:
        echo = echo_prefix(line)
        rest = line
        while rest and not rest.endswith(b"\n"):
            rest = stream.readline(65536)
        logger.warning(f"Dropped oversize line ({len(line)}+ bytes)")
        raise WireError("too_large", "message too large", echo)
    return line


def read_message(
    stream: BinaryIO, max_bytes: int = MAX_LINE_BYTES
) -> Optional[Message]:
    """Next non-blank message from a byte stream, None at end of stream."""
    while True:
        line = read_line(stream, max_bytes)
        if line is None:
            return None
        if line.strip():
            return wire_decode(line, max_bytes)
