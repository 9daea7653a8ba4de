"""Monocular humanoid digitization on a procedural synthetic corpus."""

__version__ = "0.1.0"
