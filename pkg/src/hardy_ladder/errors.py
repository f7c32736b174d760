"""Exception hierarchy shared by every module of the package."""

from __future__ import annotations


class HardyLadderError(Exception):
    """Base class; the CLI maps any subclass to exit code 1."""

    code = "error"


class DomainError(HardyLadderError, ValueError):
    code = "domain_error"


class WrongLength(HardyLadderError, ValueError):
    code = "wrong_length"


class NegativeEntry(HardyLadderError, ValueError):
    code = "negative_entry"


class NotNormalized(HardyLadderError, ValueError):
    code = "not_normalized"


class SettingOutOfRange(HardyLadderError, IndexError):
    code = "setting_out_of_range"


class PoleError(HardyLadderError, ZeroDivisionError):
    code = "pole"


class BudgetExceeded(HardyLadderError, ValueError):
    code = "budget_exceeded"


class DerivationFailed(HardyLadderError, RuntimeError):
    """A proof certificate did not reduce to zero. Always an implementation bug."""

    code = "derivation_failed"


class ZeroShots(HardyLadderError, ValueError):
    code = "zero_shots"
