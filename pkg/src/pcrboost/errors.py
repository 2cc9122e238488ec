"""Exception hierarchy shared across the package.

The CLI maps these onto distinct exit codes, so every raise site must pick
the class that matches what went wrong: DataFormatError for malformed input
bytes (unparseable CSV/JSON, wrong columns, bad config keys) and
ContractError for well-formed inputs that violate an operation's
preconditions (single-class datasets, unreachable targets, bad fractions).
"""


class PcrboostError(Exception):
    """Base class for all package-specific errors."""


class DataFormatError(PcrboostError):
    """Input bytes do not conform to a documented file format."""


class ContractError(PcrboostError):
    """A well-formed input violates an operation's precondition."""
