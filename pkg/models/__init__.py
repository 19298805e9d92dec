"""Markov chain constructors and their combinatorial structure."""
