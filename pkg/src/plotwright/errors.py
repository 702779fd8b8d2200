"""Exception types shared across the engine."""


class PlotwrightError(Exception):
    """Base class for all engine errors."""


class DslSyntaxError(PlotwrightError):
    """Character-script source failed to parse."""

    def __init__(self, message, line=None, col=None):
        self.line = line
        self.col = col
        if line is not None:
            message = f"{line}:{col or 0}: {message}"
        super().__init__(message)


class UnboundVariableError(DslSyntaxError):
    """A $variable is used on some path before any step binds it."""


class CompileError(PlotwrightError):
    """Scenario cannot be compiled into an automaton."""


class NotDeterministicError(PlotwrightError):
    """An operation requiring a DFA received a nondeterministic automaton."""


class UnknownSymbolError(PlotwrightError):
    """A word contains a name outside the automaton alphabet."""


class IllegalTransitionError(PlotwrightError):
    """Attempted to step a transition that does not exist here."""


class NoEnabledTransitionError(PlotwrightError):
    """choose_transition was handed an empty candidate set."""


class PrimitiveNotRegisteredError(PlotwrightError):
    def __init__(self, name):
        self.name = name
        super().__init__(f"no primitive handler registered for '{name}'")


class TargetMissingError(PlotwrightError):
    """Effector target does not exist in the live system."""


class WouldWriteDerivedValueError(PlotwrightError):
    """Effector attempted to write a derived story value directly."""


class NonNumericTargetError(PlotwrightError):
    """Radical-update classification needs a numeric parameter."""


class AggregationUnresolvedError(PlotwrightError):
    """A story-value aggregation references something unresolvable."""


class HorizonZeroError(PlotwrightError):
    """Forward simulation needs a horizon of at least one beat."""


class BarrierTimeoutError(PlotwrightError):
    def __init__(self, missing):
        self.missing = frozenset(missing)
        super().__init__(f"agents never checked in: {sorted(self.missing)}")


class MalformedCommandError(PlotwrightError):
    """Player input line could not be converted to a dialog move."""


class ProtocolViolationError(PlotwrightError):
    """Client sent a frame the session protocol cannot accept."""
