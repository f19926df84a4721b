"""Relational-style storage and query operators for short-read sequencing data."""

__version__ = "0.1.0"
