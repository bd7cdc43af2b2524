"""Timeout asynchronous session types: constraints, types, processes and checkers."""

__version__ = "0.1.0"
