"""Deterministic seed derivation.

All randomness in EmbodySim flows from explicit integer seeds. Child seeds
are derived by hashing, never by drawing from a shared generator, so work
can be split across threads without changing results.
"""

import hashlib
import struct
from typing import Union

import numpy as np

MASK64 = (1 << 64) - 1

SeedPart = Union[int, str, float]


def _encode_part(part: SeedPart) -> bytes:
    if isinstance(part, bool):
        return b"b" + (b"1" if part else b"0")
    if isinstance(part, int):
        return b"i" + str(part).encode("ascii")
    if isinstance(part, float):
        return b"f" + struct.pack("<d", part)
    return b"s" + str(part).encode("utf-8")


def derive_seed(*parts: SeedPart) -> int:
    """Hash an ordered tuple of values into a 64-bit seed."""
    digest = hashlib.sha256(b"\x1f".join(_encode_part(p) for p in parts)).digest()
    return int.from_bytes(digest[:8], "little")


def split_seed(root: int, index: int) -> int:
    """Seed for the ``index``-th worker or item under ``root``.

    split_seed(root, i) = first 8 bytes (little-endian) of
    SHA-256("i<root>" 0x1f "s<split>" 0x1f "i<index>").
    """
    return derive_seed(root, "split", index)


def rng_for(*parts: SeedPart) -> np.random.Generator:
    """A numpy Generator seeded from ``derive_seed(*parts)``."""
    return np.random.default_rng(derive_seed(*parts))


def unit_hash(*parts: SeedPart) -> float:
    """Deterministic float in [0, 1) derived from the given parts."""
    return (derive_seed(*parts) >> 11) / float(1 << 53)
