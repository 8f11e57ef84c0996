"""Hashed word-concept space shared by text, visual and ambient encoders."""

import re
from functools import lru_cache
from typing import Iterable, List

import numpy as np

from ..utils.seeding import rng_for

DIM = 1024

STOPWORDS = frozenset(
    """
    a an the this that these those it its is are was be been of to in on at by
    for with and or as from into onto there here which who what where please
    me my i you your we our can could would should will one some any like
    retrieve find bring get grab fetch show pick locate give hand
    """.split()
)

_WORD = re.compile(r"[a-z0-9]+")


def tokenize(text: str) -> List[str]:
    """Lowercase alphanumeric words; underscores and hyphens split words."""
    return _WORD.findall(text.lower())


def content_words(text: str) -> List[str]:
    return [w for w in tokenize(text) if w not in STOPWORDS]


@lru_cache(maxsize=4096)
def _concept(word: str, dim: int) -> np.ndarray:
    vector = rng_for("concept", word).standard_normal(dim)
    vector /= np.linalg.norm(vector)
    vector.setflags(write=False)
    return vector


def concept_vector(word: str, dim: int = DIM) -> np.ndarray:
    """Fixed pseudo-random unit vector for one word."""
    return _concept(word, dim)


def concept_sum(words: Iterable[str], dim: int = DIM) -> np.ndarray:
    """Unnormalized sum of concept vectors (zeros for no words)."""
    total = np.zeros(dim, dtype=np.float64)
    for word in words:
        total += _concept(word, dim)
    return total
