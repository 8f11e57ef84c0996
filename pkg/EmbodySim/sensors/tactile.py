"""Quasi-static gripper-marker displacement under contact."""

import logging
from dataclasses import dataclass
from typing import Any, Dict

import numpy as np

from ..errors import SensorError
from ..utils.seeding import unit_hash

logger = logging.getLogger("EmbodySim.sensors")

N_TOUCH_SITES = 16
MAX_SHEAR = np.pi / 3
CONTACT_CENTER = np.array([0.5, 0.5])


@dataclass(frozen=True)
class TactileConfig:
    grid: int = 8
    k0: float = 1.0
    d_max: float = 0.25
    g_sat: float = 4.0
    sigma: float = 0.2

    @classmethod
    def from_dict(cls, values: Dict[str, Any]) -> "TactileConfig":
        mapping = {
            "tactile_grid": "grid",
            "tactile_k0": "k0",
            "tactile_d_max": "d_max",
            "tactile_g_sat": "g_sat",
            "tactile_sigma": "sigma",
        }
        return cls(**{mapping[k]: v for k, v in values.items() if k in mapping})


@dataclass(frozen=True, eq=False)
class TactileReading:
    marker_init: np.ndarray
    marker_final: np.ndarray
    contact_point: int
    force: float

    @property
    def displacement(self) -> np.ndarray:
        return self.marker_final - self.marker_init

    @property
    def magnitudes(self) -> np.ndarray:
        return np.linalg.norm(self.displacement, axis=-1)

    def mean_displacement(self) -> float:
        return float(self.magnitudes.mean())

    def max_displacement(self) -> float:
        return float(self.magnitudes.max())


def marker_grid(grid: int) -> np.ndarray:
    """G x G x 2 marker positions at cell centers of the unit square."""
    coords = (np.arange(grid) + 0.5) / grid
    xs, ys = np.meshgrid(coords, coords, indexing="xy")
    return np.stack([xs, ys], axis=-1)


def _falloff(markers: np.ndarray, sigma: float) -> np.ndarray:
    offsets = markers - CONTACT_CENTER
    r2 = np.sum(offsets**2, axis=-1)
    return np.exp(-r2 / (2 * sigma**2))


def contact_amplitude(force: float, hardness: float, config: TactileConfig) -> float:
    """Peak displacement A = d_max * tanh(force / (k0 * hardness * g_sat))."""
    gain = force / (config.k0 * hardness)
    return config.d_max * float(np.tanh(gain / config.g_sat))


def touch(
    obj, contact_point: int, force: float, config: TactileConfig = TactileConfig()
) -> TactileReading:
    """Press the gripper onto one of the object's 16 canonical touch sites.

    Markers move radially away from the contact center, rotated by a shear
    angle fixed per (object, site), with Gaussian falloff. Softer materials
    move further.

    Args:
        obj: ObjectInstance being touched
        contact_point: Site index 0..15
        force: Normal force in newtons, > 0
        config: Grid and contact constants

    Returns:
        TactileReading
    """
    if not isinstance(contact_point, (int, np.integer)) or not (
        0 <= contact_point < N_TOUCH_SITES
    ):
        raise SensorError(
            f"contact_point must be in 0..{N_TOUCH_SITES - 1}, got {contact_point}"
        )
    if not np.isfinite(force) or force <= 0:
        raise SensorError(f"force must be > 0, got {force}")

    init = marker_grid(config.grid)
    amplitude = contact_amplitude(force, obj.material.hardness, config)
    theta = MAX_SHEAR * (2.0 * unit_hash(obj.seed, "touch", int(contact_point)) - 1.0)
    cos, sin = np.cos(theta), np.sin(theta)
    rotation = np.array([[cos, -sin], [sin, cos]])

    offsets = init - CONTACT_CENTER
    r = np.linalg.norm(offsets, axis=-1, keepdims=True)
    direction = np.divide(offsets, r, out=np.zeros_like(offsets), where=r > 0)
    direction = direction @ rotation.T
    final = init + amplitude * _falloff(init, config.sigma)[..., None] * direction
    return TactileReading(
        marker_init=init,
        marker_final=final,
        contact_point=int(contact_point),
        force=float(force),
    )


def estimate_amplitude(
    reading: TactileReading, config: TactileConfig = TactileConfig()
) -> float:
    """Recover the contact amplitude from a reading's mean displacement."""
    weights = _falloff(reading.marker_init, config.sigma)
    return reading.mean_displacement() / float(weights.mean())


def estimate_hardness(
    reading: TactileReading, config: TactileConfig = TactileConfig()
) -> float:
    """Invert the contact model: hardness = force / (k0 * g_sat * atanh(A / d_max))."""
    ratio = estimate_amplitude(reading, config) / config.d_max
    ratio = min(max(ratio, 1e-12), 1 - 1e-12)
    return reading.force / (config.k0 * config.g_sat * float(np.arctanh(ratio)))
