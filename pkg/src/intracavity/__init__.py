"""Desk-scale simulation of tweezer-assembled atom arrays in an optical cavity."""

__version__ = "0.1.0"
