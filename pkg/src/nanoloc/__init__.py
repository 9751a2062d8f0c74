"""Single-pulse event localization and classification for terahertz nano-IoT."""

__version__ = "0.1.0"
