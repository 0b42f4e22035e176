"""Multimedia event extraction trained on cross-modality generated data."""

__version__ = "0.1.0"
