"""Toolkit for set-like sentence composition datasets and embedding-geometry
evaluation."""

__version__ = "0.1.0"
