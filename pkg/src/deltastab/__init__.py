"""Feedback stabilization of 2D advection-diffusion-reaction equations by point actuators."""

__version__ = "0.1.0"
