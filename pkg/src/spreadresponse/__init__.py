"""Limit order book reconstruction, spread-change classification and price response."""

__version__ = "0.1.0"
