"""Uplink 2-D DoA estimation and DoA-driven downlink precoding for multi-cell FD-MIMO networks."""

__version__ = "0.1.0"
