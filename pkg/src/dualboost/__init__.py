"""Joint boosting and neural models over a structured and an unstructured modality."""

__version__ = "0.1.0"
