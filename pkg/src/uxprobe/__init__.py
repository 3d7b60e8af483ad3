"""uxprobe: automated usability evaluation with a simulated web user."""

__version__ = "0.1.0"
