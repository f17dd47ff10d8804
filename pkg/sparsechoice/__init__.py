"""Sparse identification of closed-form choice probability specifications."""

__version__ = "0.1.0"
