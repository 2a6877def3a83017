"""Text-instance geometry: center-mask/PMD labels, outline bolding, losses, evaluation."""

__version__ = "0.1.0"
