#!/usr/bin/env python3
"""
CLI script to build and check optimal Adams-type formulas from a checkout.
"""

import sys
from pathlib import Path

# Add parent directory to path for imports
sys.path.insert(0, str(Path(__file__).parent.parent))

from optimal_adams.cli import main  # noqa: E402

if __name__ == "__main__":
    sys.exit(main())
