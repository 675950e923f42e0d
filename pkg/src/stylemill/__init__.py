"""Learning-style detection from LMS event logs with one-pass self-training."""

__version__ = "0.1.0"
