"""Allow ``python -m chemtext``."""

import sys

from chemtext.cli import main

sys.exit(main())
