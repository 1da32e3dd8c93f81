"""Allow ``python -m hdgc``."""
import sys

from .cli import main

sys.exit(main())
