"""Impact sounds by modal synthesis: a sum of exponentially damped sinusoids."""

import logging
from dataclasses import dataclass
from typing import Tuple

import numpy as np

from ..errors import SensorError
from ..utils.seeding import unit_hash

logger = logging.getLogger("EmbodySim.sensors")

N_STRIKE_SITES = 10
MODE_RATIOS: Tuple[float, ...] = (1.0, 2.32, 4.05, 6.1, 8.3)
MODE_GAIN = 0.2
MIN_WEIGHT = 0.3


@dataclass(frozen=True, eq=False)
class ImpactSoundClip:
    sample_rate: int
    samples: np.ndarray
    strike_point: int
    force: float

    @property
    def duration(self) -> float:
        return len(self.samples) / self.sample_rate

    def rms(self, start: float, stop: float) -> float:
        """RMS over the fraction [start, stop) of the clip."""
        n = len(self.samples)
        window = self.samples[int(start * n) : int(stop * n)]
        return float(np.sqrt(np.mean(window**2))) if len(window) else 0.0


def strike_weights(object_seed: int, strike_point: int) -> np.ndarray:
    """Per-mode amplitudes in [0.3, 1] for one strike site."""
    draws = np.array(
        [
            unit_hash(object_seed, "strike", strike_point, i)
            for i in range(len(MODE_RATIOS))
        ]
    )
    return MIN_WEIGHT + (1.0 - MIN_WEIGHT) * draws


def synthesize(
    base_freq_hz: float,
    damping: float,
    weights: np.ndarray,
    force: float,
    sample_rate: int = 16000,
    duration: float = 0.5,
) -> np.ndarray:
    """Render s(t) = force * gain * sum_i a_i exp(-d_i t) sin(2 pi f_i t).

    Modes at or above Nyquist are dropped. If the peak exceeds 1 the whole
    clip is scaled down so that max |s| = 1.
    """
    n = int(round(sample_rate * duration))
    t = np.arange(n, dtype=np.float64) / sample_rate
    samples = np.zeros(n, dtype=np.float64)
    nyquist = sample_rate / 2.0
    for ratio, weight in zip(MODE_RATIOS, weights):
        freq = base_freq_hz * ratio
        if freq >= nyquist:
            continue
        samples += weight * np.exp(-damping * ratio * t) * np.sin(2 * np.pi * freq * t)
    samples *= force * MODE_GAIN
    peak = float(np.max(np.abs(samples))) if n else 0.0
    if peak > 1.0:
        samples /= peak
    return samples


def hit(
    obj,
    strike_point: int,
    force: float,
    sample_rate: int = 16000,
    duration: float = 0.5,
) -> ImpactSoundClip:
    """Strike an object at one of its 10 canonical sites.

    Args:
        obj: ObjectInstance to strike
        strike_point: Site index 0..9
        force: Strike force in newtons, > 0
        sample_rate: Output sample rate in Hz
        duration: Clip length in seconds

    Returns:
        ImpactSoundClip with exactly ``sample_rate * duration`` samples
    """
    if not isinstance(strike_point, (int, np.integer)) or not (
        0 <= strike_point < N_STRIKE_SITES
    ):
        raise SensorError(
            f"strike_point must be in 0..{N_STRIKE_SITES - 1}, got {strike_point}"
        )
    if not np.isfinite(force) or force <= 0:
        raise SensorError(f"force must be > 0, got {force}")
    material = obj.material
    samples = synthesize(
        material.modal_base_freq_hz,
        material.modal_damping,
        strike_weights(obj.seed, int(strike_point)),
        float(force),
        sample_rate,
        duration,
    )
    return ImpactSoundClip(
        sample_rate=int(sample_rate),
        samples=samples,
        strike_point=int(strike_point),
        force=float(force),
    )
