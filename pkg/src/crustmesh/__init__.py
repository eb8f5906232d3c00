"""Conforming Voronoi meshing by ball protection and sliver elimination."""

__version__ = "0.1.0"
