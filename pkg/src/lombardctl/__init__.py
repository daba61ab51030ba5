"""Controllable Lombard-style speech synthesis toolkit.

Style embeddings are manipulated by shifting principal components, fed to a
small flow-matching synthesizer with FiLM conditioning, and scored with an
objective intelligibility / speaker-similarity harness.
"""

__version__ = "0.1.0"
