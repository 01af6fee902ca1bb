"""Nanoparticle detection and cooling feasibility in Fabry-Perot microcavities."""

__version__ = "0.1.0"
