"""Imputation-then-LASSO regression for high-dimensional designs with missing entries."""

__version__ = "0.1.0"
