"""Data-driven near-well modelling workbench."""

__version__ = "0.1.0"
