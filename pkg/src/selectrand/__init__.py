"""Selective inference with randomized model selection."""

__version__ = "0.1.0"
