"""Reward shaping for dialogue policy learning with an RNN return decomposer."""

__version__ = "0.1.0"
