"""Template estimation in the quotient space of a finite isometric group action."""
__version__ = "0.1.0"
