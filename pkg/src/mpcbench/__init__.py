"""Simulated multiparty protocols over finite fields."""

__version__ = "0.1.0"
