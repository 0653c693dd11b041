"""Pulse-level simulation of an NV spin register inside an electron-spin bath."""

__version__ = "0.1.0"
