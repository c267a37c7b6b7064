"""
Base exception for the edgechain simulator.

Each package defines its own subclasses next to the code that raises them.
"""


class EdgeChainError(Exception):
    """Base exception for all simulator errors."""

    pass
