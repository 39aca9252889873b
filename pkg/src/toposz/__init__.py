"""Topology-preserving error-bounded lossy compression for 2D/3D scalar fields."""

__version__ = "0.1.0"
