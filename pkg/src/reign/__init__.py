"""Reformulation-driven robustness for conversational QA over a knowledge graph."""

__version__ = "0.1.0"
