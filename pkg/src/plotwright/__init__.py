"""Plot guidance engine: scenario compiler, character runtime, look-ahead steering."""

__version__ = "0.1.0"
