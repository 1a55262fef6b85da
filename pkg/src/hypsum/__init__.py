"""Hyperbolic gcd/lcm summation toolkit."""
__version__ = "0.1.0"
