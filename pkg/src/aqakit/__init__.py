"""Audio question answering kit: scene generation, symbolic answers, models."""

__version__ = "0.1.0"
