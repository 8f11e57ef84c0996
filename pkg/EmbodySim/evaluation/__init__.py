"""Baseline policies, attribute classifiers, metrics and benchmarks."""
