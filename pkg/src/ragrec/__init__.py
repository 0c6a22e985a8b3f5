"""Retrieval-augmented collaborative-filtering benchmark for chat-completion
models."""

__version__ = '0.1.0'
