"""Radiosonde-cluster simulator, telemetry pipeline, and analysis toolkit."""

__version__ = "0.1.0"
