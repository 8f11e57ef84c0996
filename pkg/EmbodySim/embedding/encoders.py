"""Deterministic 1024-dim encoders for every modality."""

import enum
import logging
from functools import lru_cache
from typing import Iterable, Sequence, Tuple

import numpy as np

from ..errors import EncodingError
from ..scene.model import AmbientSoundTag, ObjectInstance, Scene
from ..sensors.acoustic import ImpactSoundClip
from ..sensors.analysis import sound_stats
from ..sensors.geometry import PointCloud
from ..sensors.tactile import TactileReading
from ..sensors.thermal import TemperatureReading
from ..utils.seeding import rng_for
from .concepts import DIM, concept_sum, content_words, tokenize

logger = logging.getLogger("EmbodySim.embedding")

DEFAULT_PROJECTION_SEED = 1024
POSITION_SCALE = 0.05


class Modality(str, enum.Enum):
    OBJECT_VISUAL = "object_visual"
    POINT_CLOUD = "point_cloud"
    IMPACT_SOUND = "impact_sound"
    AMBIENT_SOUND = "ambient_sound"
    TACTILE = "tactile"
    TEMPERATURE = "temperature"
    TEXT = "text"


MODALITIES: Tuple[Modality, ...] = tuple(Modality)


def size_word(half: Sequence[float]) -> str:
    largest = max(half)
    if largest < 0.06:
        return "small"
    if largest < 0.2:
        return "medium"
    return "large"


def visual_words(obj: ObjectInstance) -> list:
    """What a camera sees: category and coarse size, never material or heat."""
    return tokenize(obj.category) + [size_word(obj.bbox.half)]


def _rbf(value: float, low: float, high: float, count: int, width: float) -> np.ndarray:
    centers = np.linspace(low, high, count)
    return np.exp(-((value - centers) ** 2) / (2 * width**2))


# Radial-basis layouts per statistic: (low, high, centers, width).
TEMPERATURE_BASIS = (-10.0, 110.0, 25, 8.0)
LOG_F0_BASIS = (np.log(150.0), np.log(1200.0), 32, 0.07)
LOG_DECAY_BASIS = (np.log(4.0), np.log(80.0), 32, 0.1)
LOG_CENTROID_BASIS = (np.log(200.0), np.log(6000.0), 16, 0.25)
LOG_DISPLACEMENT_BASIS = (np.log(0.003), np.log(0.3), 96, 0.05)
LOG_EXTENT_BASIS = (np.log(0.005), np.log(3.0), 24, 0.3)


def _log(value: float) -> float:
    return float(np.log(max(value, 1e-9)))


@lru_cache(maxsize=32)
def projection(
    modality: str, in_dim: int, seed: int = DEFAULT_PROJECTION_SEED
) -> np.ndarray:
    """Fixed DIM x in_dim matrix with orthonormal columns for one modality."""
    gaussian = rng_for("projection", seed, modality).standard_normal((DIM, in_dim))
    q, r = np.linalg.qr(gaussian)
    q *= np.sign(np.diag(r))
    q.setflags(write=False)
    return q


def _project(modality: Modality, code: np.ndarray, seed: int) -> np.ndarray:
    vector = projection(modality.value, code.shape[0], seed) @ code
    return _normalize(vector)


def _normalize(vector: np.ndarray) -> np.ndarray:
    norm = np.linalg.norm(vector)
    if not np.isfinite(norm) or norm == 0:
        raise EncodingError("cannot normalize a zero or non-finite feature")
    return vector / norm


def encode_text(text: str) -> np.ndarray:
    words = content_words(text)
    if not words:
        raise EncodingError(f"text has no content words: {text!r}")
    return _normalize(concept_sum(words))


def encode_visual(obj: ObjectInstance) -> np.ndarray:
    return _normalize(concept_sum(visual_words(obj)))


def encode_ambient(tag: AmbientSoundTag) -> np.ndarray:
    return encode_text(tag.description)


def temperature_code(celsius: float) -> np.ndarray:
    return _rbf(celsius, *TEMPERATURE_BASIS)


def impact_code(samples: np.ndarray, sample_rate: int) -> np.ndarray:
    stats = sound_stats(samples, sample_rate)
    return np.concatenate(
        [
            _rbf(_log(stats.fundamental_hz), *LOG_F0_BASIS),
            _rbf(_log(stats.decay_rate), *LOG_DECAY_BASIS),
            _rbf(_log(stats.centroid_hz), *LOG_CENTROID_BASIS),
        ]
    )


def tactile_code(reading: TactileReading) -> np.ndarray:
    return np.concatenate(
        [
            _rbf(_log(reading.mean_displacement()), *LOG_DISPLACEMENT_BASIS),
            _rbf(_log(reading.max_displacement()), *LOG_DISPLACEMENT_BASIS),
        ]
    )


def point_cloud_code(cloud: PointCloud) -> np.ndarray:
    extents = np.sort(cloud.points.max(axis=0) - cloud.points.min(axis=0))[::-1]
    return np.concatenate([_rbf(_log(e), *LOG_EXTENT_BASIS) for e in extents])


def encode(modality, payload, seed: int = DEFAULT_PROJECTION_SEED) -> np.ndarray:
    """Encode a payload of the given modality as a unit 1024-dim vector.

    Args:
        modality: Modality or its string value
        payload: str for text; ObjectInstance for object_visual; PointCloud;
            ImpactSoundClip or (sample_rate, samples); AmbientSoundTag;
            TactileReading; TemperatureReading or a float in Celsius
        seed: Seed of the fixed per-modality projections

    Returns:
        float64 array of shape (1024,) with unit norm

    Raises:
        EncodingError: The payload type does not match the modality
    """
    try:
        modality = Modality(modality)
    except ValueError as e:
        raise EncodingError(f"unknown modality {modality!r}") from e

    if modality is Modality.TEXT:
        _expect(modality, payload, str)
        return encode_text(payload)
    if modality is Modality.OBJECT_VISUAL:
        _expect(modality, payload, ObjectInstance)
        return encode_visual(payload)
    if modality is Modality.AMBIENT_SOUND:
        _expect(modality, payload, AmbientSoundTag)
        return encode_ambient(payload)
    if modality is Modality.TEMPERATURE:
        if isinstance(payload, TemperatureReading):
            celsius = payload.celsius
        elif isinstance(payload, (int, float)) and not isinstance(payload, bool):
            celsius = float(payload)
        else:
            raise _mismatch(modality, payload)
        return _project(modality, temperature_code(celsius), seed)
    if modality is Modality.IMPACT_SOUND:
        if isinstance(payload, ImpactSoundClip):
            code = impact_code(payload.samples, payload.sample_rate)
        elif isinstance(payload, tuple) and len(payload) == 2:
            code = impact_code(np.asarray(payload[1]), int(payload[0]))
        else:
            raise _mismatch(modality, payload)
        return _project(modality, code, seed)
    if modality is Modality.TACTILE:
        _expect(modality, payload, TactileReading)
        return _project(modality, tactile_code(payload), seed)
    _expect(modality, payload, PointCloud)
    return _project(modality, point_cloud_code(payload), seed)


def _mismatch(modality: Modality, payload) -> EncodingError:
    return EncodingError(
        f"payload of type {type(payload).__name__} does not match {modality.value}"
    )


def _expect(modality: Modality, payload, kind):
    if not isinstance(payload, kind):
        raise _mismatch(modality, payload)


def position_code(center: Iterable[float], dim: int = DIM) -> np.ndarray:
    """Unit sinusoidal code of a 3D position."""
    center = np.asarray(list(center), dtype=np.float64)
    n_freq = dim // 6
    freqs = 2.0 ** np.linspace(-2.0, 4.0, n_freq)
    angles = np.outer(center, freqs)
    code = np.zeros(dim, dtype=np.float64)
    waves = np.concatenate([np.sin(angles), np.cos(angles)], axis=1)
    code[: 6 * n_freq] = waves.ravel()
    return code / np.linalg.norm(code)


def visual_matrix(scene: Scene) -> np.ndarray:
    """O x DIM visual encodings without position codes."""
    return np.stack([encode_visual(o) for o in scene.objects])


def scene_features(scene: Scene) -> np.ndarray:
    """O x DIM object-centric scene representation; row i is object id i.

    Each row is the visual encoding plus a small position code, renormalized.
    """
    rows = []
    for obj in scene.objects:
        row = encode_visual(obj) + POSITION_SCALE * position_code(obj.bbox.center)
        rows.append(row / np.linalg.norm(row))
    return np.stack(rows)


def cosine(a: np.ndarray, b: np.ndarray) -> float:
    """Cosine similarity; raises EncodingError for a zero vector."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    na, nb = np.linalg.norm(a), np.linalg.norm(b)
    if na == 0 or nb == 0:
        raise EncodingError("cosine of a zero vector is undefined")
    value = float(np.dot(a, b) / (na * nb))
    return min(1.0, max(-1.0, value))
