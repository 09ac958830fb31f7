"""High-resolution slow motion from a dual-stream (main + auxiliary) video pair."""

__version__ = "0.1.0"
