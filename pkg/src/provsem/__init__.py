"""Semantic augmentation of system-call events for intrusion detection.

Events are normalized, explained in natural language, embedded, reduced with
RBF kernel PCA and classified by MLP, GBDT or XGBOD-style detectors.
"""

from .errors import ConfigError, DataError, ProviderError, ProvsemError

__version__ = "0.1.0"

__all__ = ["ConfigError", "DataError", "ProviderError", "ProvsemError", "__version__"]
