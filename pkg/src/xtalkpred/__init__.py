"""Crosstalk-aware interconnect delay prediction with a coupled-RC transient oracle."""

__version__ = "0.1.0"
