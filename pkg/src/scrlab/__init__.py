"""Executable checks for the scalable commutativity rule and its two proof constructions."""

__version__ = "0.1.0"
