"""CLI interface for fidscan"""

from .commands import main

__all__ = ["main"]
