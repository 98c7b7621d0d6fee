"""Digital twin of a four-cantilever piezoresistive gas-flow sensor and its inverse estimators."""

__version__ = "1.0.0"
