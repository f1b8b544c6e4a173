"""Variational recurrent generator for dynamic attributed directed graphs."""

__version__ = "0.1.0"
