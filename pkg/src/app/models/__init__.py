"""
Data models for the edgechain simulator.

This module provides access to all data models used in the application.
"""

from .pydantic import *  # noqa: F401,F403
from .pydantic import __all__  # noqa: F401
