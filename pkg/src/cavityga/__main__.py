"""Run ``python -m cavityga``."""

import sys

from .cli import main

sys.exit(main())
