"""Regularized minimal polynomial extrapolation."""
