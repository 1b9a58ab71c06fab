"""Labelled sequent calculi for non-distributive modal logic."""

__version__ = "0.1.0"
