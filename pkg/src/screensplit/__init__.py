"""Refactor single-screen HTML applications into synchronized master/slave
pairs for multiscreen use: map elements to devices, annotate and split the
document, and mirror runtime changes between the two halves."""

__version__ = "0.1.0"
