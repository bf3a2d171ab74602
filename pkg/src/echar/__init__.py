"""Scene text detection with edge-enhanced MSERs and characterness cues."""

__version__ = "0.1.0"
