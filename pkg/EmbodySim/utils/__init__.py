"""Utility modules for EmbodySim."""

from .logging import setup_logging
from .seeding import derive_seed, rng_for, split_seed, unit_hash

__all__ = ["setup_logging", "derive_seed", "rng_for", "split_seed", "unit_hash"]
