"""Exception types raised across the package."""


class FmpError(Exception):
    """Base class for all package errors."""


class ImpossibleObservation(FmpError, ValueError):
    """An observation has zero probability under the current belief and action."""


class BudgetExceeded(FmpError, RuntimeError):
    """Exact enumeration would exceed its size guard."""


class MemoryBudgetExceeded(FmpError, RuntimeError):
    """A belief-tree level holds more unique nodes than the configured cap."""


class DegenerateTarget(FmpError, ValueError):
    """The requested value error is so loose that any estimate satisfies it."""


class PomdpFormatError(FmpError):
    """Base class for `.pomdp` loader errors; carries the offending line number."""

    def __init__(self, message: str, lineno: int | None = None):
        self.lineno = lineno
        where = f"line {lineno}: " if lineno is not None else ""
        super().__init__(where + message)


class PomdpSyntaxError(PomdpFormatError):
    pass


class PomdpSemanticError(PomdpFormatError):
    pass


class PomdpRangeError(PomdpFormatError):
    pass


class InvalidAction(FmpError, ValueError):
    pass


class TerminalState(FmpError, RuntimeError):
    """Stepping an environment that has already terminated."""


class EmptyBelief(FmpError, ValueError):
    pass


class ParticleDepletion(FmpError, RuntimeError):
    """Every particle was rejected and no exact fallback is available."""
