"""Capacity bounds, rate regions and block-Markov simulation for multiple-access
channels whose outputs are switched between the decoder and the encoders."""

__version__ = "0.1.0"
