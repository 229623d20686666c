"""Numerical lab for the inviscid limit of 2D Navier-Stokes with vortex-wave data."""

__version__ = "0.1.0"
