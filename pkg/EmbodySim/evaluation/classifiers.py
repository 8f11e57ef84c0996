"""Attribute classifiers that turn sensor payloads into words.

The temperature and tactile classifiers invert the sensor models directly.
The acoustic classifier is a nearest-centroid rule over z-scored spectral
statistics, fitted on reference strikes of every catalog material.
"""

import logging
from dataclasses import dataclass
from functools import lru_cache
from pathlib import Path
from typing import Dict, Optional, Tuple, Union

import numpy as np
import yaml

from ..environment.payloads import (
    PayloadRecord,
    decode_celsius,
    decode_clip,
    decode_tactile,
)
from ..errors import CatalogError, EncodingError
from ..scene.catalog import (
    DATA_DIR,
    Catalog,
    MaterialProfile,
    catalog_hash,
    load_catalog,
)
from ..sensors.acoustic import ImpactSoundClip, strike_weights, synthesize
from ..sensors.analysis import sound_stats
from ..sensors.export import clip_to_wav, wav_to_samples
from ..sensors.tactile import TactileConfig, TactileReading, estimate_hardness
from ..utils.seeding import derive_seed

logger = logging.getLogger("EmbodySim.evaluation")

DEFAULT_CALIBRATION_PATH = DATA_DIR / "calibration.yaml"


@dataclass(frozen=True)
class Calibration:
    version: int = 1
    cold_below: float = 14.0
    hot_above: float = 40.0
    strike_seeds: int = 6
    strike_sites: int = 5
    strike_force: float = 1.0
    sample_rate: int = 16000
    duration: float = 0.5
    min_std: float = 1e-3

    @classmethod
    def from_dict(cls, raw: Dict) -> "Calibration":
        try:
            acoustic = raw["acoustic"]
            return cls(
                version=int(raw["version"]),
                cold_below=float(raw["temperature"]["cold_below"]),
                hot_above=float(raw["temperature"]["hot_above"]),
                strike_seeds=int(acoustic["strike_seeds"]),
                strike_sites=int(acoustic["strike_sites"]),
                strike_force=float(acoustic["strike_force"]),
                sample_rate=int(acoustic["sample_rate"]),
                duration=float(acoustic["duration"]),
                min_std=float(acoustic["min_std"]),
            )
        except (KeyError, TypeError, ValueError) as e:
            raise CatalogError(f"Malformed calibration file: {e}") from e


def load_calibration(path: Optional[Union[str, Path]] = None) -> Calibration:
    with open(path or DEFAULT_CALIBRATION_PATH, "r") as f:
        return Calibration.from_dict(yaml.safe_load(f))


def sound_features(samples: np.ndarray, sample_rate: int) -> np.ndarray:
    """(log fundamental, log decay, log centroid) of a clip."""
    stats = sound_stats(samples, sample_rate)
    values = (stats.fundamental_hz, stats.decay_rate, stats.centroid_hz)
    return np.log(np.maximum(np.array(values, dtype=np.float64), 1e-9))


@dataclass(frozen=True, eq=False)
class AcousticModel:
    materials: Tuple[str, ...]
    centroids: np.ndarray
    scale: np.ndarray

    def classify(self, features: np.ndarray) -> str:
        distances = np.linalg.norm((self.centroids - features) / self.scale, axis=1)
        return self.materials[int(np.argmin(distances))]


def reference_clip(
    material: MaterialProfile, seed: int, site: int, calibration: Calibration
):
    """A reference strike as it would be recorded (through 16-bit PCM)."""
    samples = synthesize(
        material.modal_base_freq_hz,
        material.modal_damping,
        strike_weights(seed, site),
        calibration.strike_force,
        calibration.sample_rate,
        calibration.duration,
    )
    return wav_to_samples(clip_to_wav(samples, calibration.sample_rate))


def fit_acoustic_model(catalog: Catalog, calibration: Calibration) -> AcousticModel:
    """Per-material centroids and the pooled within-material std."""
    names, centroids, residuals = [], [], []
    for material in catalog.materials:
        rows = []
        for k in range(calibration.strike_seeds):
            seed = derive_seed("calibration", material.name, k)
            for site in range(calibration.strike_sites):
                rate, samples = reference_clip(material, seed, site, calibration)
                rows.append(sound_features(samples, rate))
        rows = np.array(rows)
        names.append(material.name)
        centroids.append(rows.mean(axis=0))
        residuals.append(rows - rows.mean(axis=0))
    pooled = np.concatenate(residuals)
    scale = np.maximum(pooled.std(axis=0), calibration.min_std)
    logger.debug(f"Fitted acoustic model for {len(names)} materials, scale={scale}")
    return AcousticModel(
        materials=tuple(names), centroids=np.array(centroids), scale=scale
    )


@lru_cache(maxsize=4)
def _cached_model(
    digest: str, calibration: Calibration, catalog: Catalog
) -> AcousticModel:
    return fit_acoustic_model(catalog, calibration)


class AttributeClassifiers:
    """Temperature thresholds, tactile hardness inversion and acoustic material bins."""

    def __init__(
        self,
        catalog: Optional[Catalog] = None,
        calibration: Optional[Calibration] = None,
        tactile: TactileConfig = TactileConfig(),
    ):
        self.catalog = catalog or load_catalog()
        self.calibration = calibration or load_calibration()
        self.tactile = tactile
        self._acoustic: Optional[AcousticModel] = None

    @property
    def acoustic(self) -> AcousticModel:
        if self._acoustic is None:
            digest = catalog_hash(self.catalog)
            self._acoustic = _cached_model(digest, self.calibration, self.catalog)
        return self._acoustic

    def temperature_label(self, celsius: float) -> str:
        if celsius < self.calibration.cold_below:
            return "cold"
        if celsius > self.calibration.hot_above:
            return "hot"
        return "room"

    def hardness_material(self, reading: TactileReading) -> MaterialProfile:
        """Catalog material whose hardness is nearest on a log scale."""
        estimate = np.log(max(estimate_hardness(reading, self.tactile), 1e-9))
        return min(
            self.catalog.materials,
            key=lambda m: abs(np.log(m.hardness) - estimate),
        )

    def hardness_word(self, reading: TactileReading) -> str:
        return self.hardness_material(reading).hardness_word

    def material(self, clip: ImpactSoundClip) -> str:
        return self.acoustic.classify(sound_features(clip.samples, clip.sample_rate))

    def slot_value(self, slot: str, record: PayloadRecord) -> str:
        """Word for a sensor slot, read from the payload that grounds it.

        temp_adj comes from a TEMPERATURE payload, hardness_adj from TACTILE
        and material from IMPACT_SOUND.
        """
        if slot == "temp_adj" and record.kind == "TEMPERATURE":
            return self.temperature_label(decode_celsius(record))
        if slot == "hardness_adj" and record.kind == "TACTILE":
            return self.hardness_word(decode_tactile(record))
        if slot == "material" and record.kind == "IMPACT_SOUND":
            return self.material(decode_clip(record))
        raise EncodingError(f"a {record.kind} payload cannot fill slot {slot}")

    def attribute_value(self, attribute: str, record: PayloadRecord):
        """Recovered object attribute (temp_label, material, hardness) of a payload."""
        if attribute == "temp_label":
            return self.temperature_label(decode_celsius(record))
        if attribute == "material":
            return self.material(decode_clip(record))
        if attribute == "hardness":
            return self.hardness_material(decode_tactile(record)).hardness
        raise ValueError(f"unknown attribute {attribute}")


@lru_cache(maxsize=1)
def default_classifiers() -> AttributeClassifiers:
    return AttributeClassifiers()
