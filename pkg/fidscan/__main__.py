#!/usr/bin/env python3
"""
Entry point for the fidscan package when run as a module.
"""

from fidscan.cli.commands import main

if __name__ == "__main__":
    main()
