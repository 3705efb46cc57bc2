"""Entry point for `python -m tscongruence`."""

import sys

from .cli import main

sys.exit(main())
