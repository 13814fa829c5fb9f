"""Transition-based dependency parsing with stack LSTMs."""

__version__ = "0.1.0"
