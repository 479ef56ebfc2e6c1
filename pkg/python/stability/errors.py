"""
Exception types.

Every error raised on bad input derives from ValueError, so callers (and the
CLI's exit-code mapping) can treat validation failures uniformly.
"""

from typing import Optional


class StabilityError(ValueError):
    """Base class for invalid input anywhere in the package."""


class BitFormatError(StabilityError):
    """Binary input (a bit file or an encoded rule) could not be parsed."""

    def __init__(self, message: str, offset: int):
        super().__init__(f"{message} at byte offset {offset}")
        self.offset = offset


class UndefinedFrequencyError(StabilityError):
    """Frequency and bias are undefined on an empty sequence."""


class RuleSyntaxError(StabilityError):
    def __init__(self, message: str, line: int, column: int):
        super().__init__(f"line {line}, column {column}: {message}")
        self.line = line
        self.column = column


class RuleSemanticError(StabilityError):
    def __init__(self, message: str, state: Optional[int] = None):
        prefix = f"state {state}: " if state is not None else ""
        super().__init__(f"{prefix}{message}")
        self.state = state


class EmptySelectionError(StabilityError):
    """A rule selected nothing, so ν(R(x)) and the bound are undefined."""

    def __init__(self, message: str, halt_reason: Optional[str] = None):
        suffix = f" (halt_reason={halt_reason})" if halt_reason else ""
        super().__init__(f"{message}{suffix}")
        self.halt_reason = halt_reason


class CalibrationError(StabilityError):
    pass


class ConfigError(StabilityError):
    pass
