"""Numerical laboratory for the Craik-Leibovich equation viewed as an Euler
equation on a centrally extended Lie algebra."""

__version__ = "0.1.0"
