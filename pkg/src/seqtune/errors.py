"""Exception hierarchy shared across the toolkit.

Exit-code mapping for the CLI lives in cli.py; library code only raises.
"""


class SeqtuneError(Exception):
    pass


class ContractViolation(SeqtuneError, ValueError):
    """A caller broke an API precondition (shape mismatch, bad length, ...)."""


class ValidationError(SeqtuneError, ValueError):
    """A config / spec / file failed validation before any work started."""


class NumericError(SeqtuneError, ArithmeticError):
    """A computation produced non-finite values (overflow, divergence)."""


class MissingArtifactError(SeqtuneError, FileNotFoundError):
    """A required input file (dataset, model) does not exist."""
