"""Desk-scale human-in-the-loop simulator for shared-autonomy robotic sanding."""

__version__ = "0.1.0"
