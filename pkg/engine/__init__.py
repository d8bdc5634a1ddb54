"""Adaptive multi-mesh finite elements on bisected simplicial meshes."""
__version__ = "0.3.0"
