"""EmbodySim - a deterministic multisensory embodied-environment simulator."""

__version__ = "0.1.0"
