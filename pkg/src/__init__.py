"""Resurgent Analysis of the Quartic Oscillator in the Bargmann Representation"""

__version__ = "0.1.0"
