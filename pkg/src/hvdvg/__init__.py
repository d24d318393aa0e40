"""Helper-virus / defective-viral-genome cell-culture infection model."""

__version__ = "0.1.0"
