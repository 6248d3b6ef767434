"""Exception types shared across the toolkit."""


class DataError(Exception):
    """Missing, unreadable, or inconsistent input data (CLI exit code 2)."""


class NumericError(Exception):
    """Non-finite loss or other numeric failure during training (CLI exit code 3)."""
