"""Analytic sensor models and payload codecs."""
