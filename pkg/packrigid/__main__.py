"""Run the packrigid command line."""

import sys

from .cli import main

sys.exit(main())
