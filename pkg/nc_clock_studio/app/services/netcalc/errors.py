class NetCalcError(Exception):
    """Base class; ``code`` is the stable identifier reported by the CLI and the API."""

    code = "netcalc-error"


class InvalidParameter(NetCalcError, ValueError):
    code = "invalid-parameter"


class DomainError(NetCalcError, ValueError):
    code = "domain-error"


class UnsupportedOperand(NetCalcError):
    code = "unsupported-operand"


class UnboundedResult(NetCalcError):
    code = "unbounded-result"


class InvalidClock(NetCalcError, ValueError):
    code = "invalid-clock"


class ClockMismatch(NetCalcError):
    code = "clock-mismatch"


class InvalidScript(NetCalcError):
    code = "invalid-script"


class TraceMismatch(NetCalcError):
    code = "trace-mismatch"


class UnstableElement(NetCalcError):
    code = "unstable-element"


class ConfigurationInfeasible(NetCalcError):
    code = "configuration-infeasible"


class UnknownScenario(NetCalcError, KeyError):
    code = "unknown-scenario"

    def __str__(self):
        return Exception.__str__(self)
