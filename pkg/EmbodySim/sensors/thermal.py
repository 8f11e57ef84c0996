"""Label-conditioned temperature readings."""

from dataclasses import dataclass
from typing import Optional

from ..errors import SensorError
from ..scene.catalog import TEMP_LABELS, Catalog, load_catalog
from ..utils.seeding import rng_for


@dataclass(frozen=True)
class TemperatureReading:
    celsius: float
    label: str


def sample_temperature(
    label: str, seed: int, catalog: Optional[Catalog] = None
) -> TemperatureReading:
    """Draw a temperature uniformly inside the label's range.

    Args:
        label: One of hot, cold or room
        seed: Seed for the draw; equal seeds give equal readings
        catalog: Catalog holding the label ranges (built-in if omitted)

    Returns:
        TemperatureReading with ``celsius`` inside the label range
    """
    if label not in TEMP_LABELS:
        raise SensorError(f"Unknown temperature label: {label}")
    catalog = catalog or load_catalog()
    low, high = catalog.temp_range(label)
    celsius = float(rng_for("temperature", label, seed).uniform(low, high))
    return TemperatureReading(celsius=celsius, label=label)


def read_temperature(obj) -> TemperatureReading:
    """The reading a contact thermometer reports for a scene object."""
    return TemperatureReading(celsius=obj.temp_celsius, label=obj.temp_label)
