"""Controllable microscopic traffic simulation with a guided diffusion motion planner."""

__version__ = "0.1.0"
