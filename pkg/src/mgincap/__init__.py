"""Capacity and capacity bounds for the mixed Gaussian-impulsive noise channel."""
