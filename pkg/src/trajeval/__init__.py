"""Evaluation toolkit for multi-agent motion forecasting on scenario corpora."""

__version__ = "0.1.0"
