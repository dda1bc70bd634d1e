"""Exception hierarchy shared by every stage; exit codes match the CLI contract."""


class StgwError(Exception):
    """Base class; `exit_code` is what the CLI process returns."""

    exit_code = 1


class ValidationError(StgwError):
    """Rejected input: schema violations, bad preconditions, malformed config."""

    exit_code = 2


class NumericError(StgwError):
    """Numeric failure: NaN loss, divergence, degenerate spectrum."""

    exit_code = 3


class DataIOError(StgwError):
    """Missing or unreadable/unwritable files."""

    exit_code = 4
