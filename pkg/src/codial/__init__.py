"""CODIAL: transformation-prediction plus view-alignment self-supervised pretraining."""

__version__ = "0.1.0"
