"""Parabolic dimension, thermal capacity and Brownian hitting experiments."""
__version__ = "0.1.0"
