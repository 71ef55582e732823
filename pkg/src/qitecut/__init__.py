"""Product-state imaginary-time evolution for MaxCut."""

__version__ = "0.1.0"
