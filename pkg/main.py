#!/usr/bin/env python3
"""
graphnls CLI launcher

Usage:
    python main.py COMMAND --graph GRAPH [options]

See `python main.py --help` for the commands and flags.
"""

import sys
from pathlib import Path

# Add project root to path
sys.path.insert(0, str(Path(__file__).parent))

from graphnls.main import main

if __name__ == "__main__":
    sys.exit(main())
