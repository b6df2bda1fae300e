#!/usr/bin/env python3
"""
Interpolated Walks experiment runner
Main entry point for chain generation, search runs and success curves.
"""

import sys
from pathlib import Path

# Add the interp_walks package to Python path
sys.path.insert(0, str(Path(__file__).parent))

from interp_walks.cli import main


if __name__ == "__main__":
    sys.exit(main())
