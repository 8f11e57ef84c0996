"""Test package for EmbodySim."""
