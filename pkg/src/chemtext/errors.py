"""Common exception base for the chemtext package.

Every domain error raised by the library derives from :class:`ChemtextError`,
so callers (notably the CLI) can distinguish bad data from genuine bugs with a
single ``except`` clause.
"""

from __future__ import annotations


class ChemtextError(Exception):
    """Base class for all errors raised by chemtext on bad input data."""
