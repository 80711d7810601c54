"""Gabor frame bounds and timing-jitter stability certificates."""

__version__ = '0.1.0'
