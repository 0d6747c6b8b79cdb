"""Key-instruction based binary function similarity."""

__version__ = "0.1.0"
