"""Learn from a sequence of graph snapshots and predict the next topology."""

__version__ = "0.1.0"
