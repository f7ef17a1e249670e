"""Extractive summarization by next-sentence prediction with an end-of-summary candidate."""

__version__ = "0.1.0"
