"""Aligning sensor adapters with language.

Each sensor adapter is fitted by ridge least squares so that the adapted
encoding of a reading lands on the text encoding of its caption ("it
sounds like steel", "it feels soft", "it feels hot").
"""

import logging
from dataclasses import dataclass
from functools import lru_cache
from typing import Dict, List, Optional, Tuple

import numpy as np

from ..scene.catalog import TEMP_LABELS, Catalog, MaterialProfile, load_catalog
from ..sensors.acoustic import N_STRIKE_SITES, strike_weights, synthesize
from ..sensors.export import clip_to_wav, wav_to_samples
from ..sensors.tactile import N_TOUCH_SITES, TactileConfig, touch
from ..taskgen.templates import TemplateBank, caption, load_templates
from ..utils.seeding import derive_seed, rng_for
from .adapters import AdapterParams
from .encoders import Modality, encode, encode_text

logger = logging.getLogger("EmbodySim.embedding")

DEFAULT_RIDGE = 1e-3
ALIGNED_MODALITIES = (Modality.IMPACT_SOUND, Modality.TACTILE, Modality.TEMPERATURE)


@dataclass(frozen=True)
class _Specimen:
    """Just enough of an object for the contact sensors."""

    material: MaterialProfile
    seed: int


def ridge_fit(
    inputs: np.ndarray, targets: np.ndarray, ridge: float = DEFAULT_RIDGE
) -> Tuple[np.ndarray, np.ndarray]:
    """Affine map (W, b) minimizing sum ||W x + b - y||^2 + ridge ||W||^2.

    Solved in dual form on centered data, so the cost is one n x n solve.
    """
    x_mean = inputs.mean(axis=0)
    y_mean = targets.mean(axis=0)
    x = inputs - x_mean
    y = targets - y_mean
    gram = x @ x.T + ridge * np.eye(x.shape[0])
    weight = (x.T @ np.linalg.solve(gram, y)).T
    bias = y_mean - weight @ x_mean
    return weight, bias


def impact_pairs(
    catalog: Catalog,
    bank: TemplateBank,
    per_material: int,
    sample_rate: int,
    duration: float,
) -> Tuple[List[np.ndarray], List[str]]:
    features, captions = [], []
    for material in catalog.materials:
        text = caption("impact_sound", material.name, bank)
        for k in range(per_material):
            seed = derive_seed("align", "impact", material.name, k)
            samples = synthesize(
                material.modal_base_freq_hz,
                material.modal_damping,
                strike_weights(seed, k % N_STRIKE_SITES),
                1.0,
                sample_rate,
                duration,
            )
            recorded = wav_to_samples(clip_to_wav(samples, sample_rate))
            features.append(encode(Modality.IMPACT_SOUND, recorded))
            captions.append(text)
    return features, captions


def tactile_pairs(
    catalog: Catalog, bank: TemplateBank, per_material: int, config: TactileConfig
) -> Tuple[List[np.ndarray], List[str]]:
    features, captions = [], []
    for material in catalog.materials:
        text = caption("tactile", material.hardness_word, bank)
        for k in range(per_material):
            seed = derive_seed("align", "touch", material.name, k)
            specimen = _Specimen(material=material, seed=seed)
            reading = touch(specimen, k % N_TOUCH_SITES, 1.0, config)
            features.append(encode(Modality.TACTILE, reading))
            captions.append(text)
    return features, captions


def temperature_pairs(
    catalog: Catalog, bank: TemplateBank, per_label: int
) -> Tuple[List[np.ndarray], List[str]]:
    features, captions = [], []
    for label in TEMP_LABELS:
        text = caption("temperature", bank.temperature_word(label), bank)
        low, high = catalog.temp_range(label)
        rng = rng_for("align", "temperature", label)
        for celsius in rng.uniform(low, high, per_label):
            features.append(encode(Modality.TEMPERATURE, float(celsius)))
            captions.append(text)
    return features, captions


def align_adapters(
    params: Optional[AdapterParams] = None,
    catalog: Optional[Catalog] = None,
    bank: Optional[TemplateBank] = None,
    per_class: int = 40,
    ridge: float = DEFAULT_RIDGE,
    tactile: TactileConfig = TactileConfig(),
    sample_rate: int = 16000,
    duration: float = 0.5,
) -> AdapterParams:
    """Fit the impact-sound, tactile and temperature adapters onto caption encodings.

    Args:
        params: Starting parameters; other adapters and the SELECT head are kept
        catalog: Material catalog (built-in if omitted)
        bank: Template bank holding the captions (built-in if omitted)
        per_class: Readings per material or temperature label
        ridge: Ridge penalty
        tactile: Tactile sensor constants
        sample_rate: Impact clip rate
        duration: Impact clip length

    Returns:
        A new AdapterParams
    """
    if per_class < 1:
        raise ValueError(f"per_class must be >= 1, got {per_class}")
    catalog = catalog or load_catalog()
    bank = bank or load_templates()
    aligned = (params or AdapterParams.identity()).copy()

    pairs: Dict[Modality, Tuple[List[np.ndarray], List[str]]] = {
        Modality.IMPACT_SOUND: impact_pairs(
            catalog, bank, per_class, sample_rate, duration
        ),
        Modality.TACTILE: tactile_pairs(catalog, bank, per_class, tactile),
        Modality.TEMPERATURE: temperature_pairs(catalog, bank, per_class),
    }
    for modality, (features, captions) in pairs.items():
        targets = np.stack([encode_text(text) for text in captions])
        weight, bias = ridge_fit(np.stack(features), targets, ridge)
        aligned.set_adapter(modality, weight, bias)
        logger.debug(f"Aligned {modality.value} adapter on {len(features)} readings")
    return aligned


@lru_cache(maxsize=1)
def aligned_params() -> AdapterParams:
    """Identity adapters with the sensor adapters aligned on the built-in data."""
    logger.info("Aligning sensor adapters with captions")
    return align_adapters()
