"""Desk-scale laboratory for theons, exchangeable arrays and quasirandomness falsifiers."""

__version__ = "0.1.0"
