"""Finite-element sound transmission loss simulation of a two-room test facility."""

__version__ = "0.1.0"
