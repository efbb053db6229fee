"""Exception hierarchy shared by every package module."""


class FtiDistillError(Exception):
    """Base class for all errors raised by the toolkit."""


class InvalidInput(FtiDistillError, ValueError):
    """An argument violates an operation's precondition."""


class DatasetError(FtiDistillError, ValueError):
    """A dataset file is missing, malformed or cannot be split."""


class BudgetExhausted(FtiDistillError):
    """A cache miss occurred after the teacher-call budget was spent."""


class CacheCorrupt(FtiDistillError):
    """A persisted file failed its checksum, magic or dimension checks."""


class TeacherMismatch(FtiDistillError):
    """A cache was produced by a different teacher than the loaded one."""


class HintUnavailable(FtiDistillError):
    """An intermediate-layer hint was requested from a logits-only cache."""


class NumericalDivergence(FtiDistillError):
    """Activations or losses became non-finite during training."""


class TooLarge(FtiDistillError):
    """An exhaustive enumeration exceeds its size limit."""
