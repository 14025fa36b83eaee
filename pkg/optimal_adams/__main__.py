"""Allow ``python -m optimal_adams``."""

import sys

from optimal_adams.cli import main

sys.exit(main())
