"""Rate-distortion regions for distributed sources with nearly common components."""

__version__ = "0.1.0"
