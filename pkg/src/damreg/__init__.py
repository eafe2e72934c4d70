"""Day-ahead market clearing with locational prices and a truth-inducing settlement for a dominant firm."""

__version__ = "0.1.0"
