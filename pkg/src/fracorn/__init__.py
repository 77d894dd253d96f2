"""Projected fractional seminorms, Nitsche-type extensions and Korn constants."""
__version__ = "0.1.0"
