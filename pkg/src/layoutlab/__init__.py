"""Analog layout generation and design-space exploration toolkit.

Builds physical layouts for small analog circuits (placement, routing,
verification, parasitic extraction, AC simulation) and explores layout
variants with either a random strategy or a two-level reinforcement
learning strategy, emitting a structured dataset of every validated
variant.
"""

__version__ = "0.1.0"
