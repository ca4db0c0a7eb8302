"""covis: geometric camera-memory retrieval engine and steering simulator."""

__version__ = "0.1.0"
