"""Whole-graph embeddings of conversational networks for abuse detection."""

__version__ = "0.1.0"
