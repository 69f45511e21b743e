"""Secure edge-to-cloud heart-rate telemetry stack."""

__version__ = "0.1.0"
