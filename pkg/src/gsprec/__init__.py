"""Sequence-aware spectral collaborative filtering."""
