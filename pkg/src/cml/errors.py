"""Exception hierarchy shared by every module and mapped to CLI exit codes."""


class CMLError(Exception):
    """Base class for all errors raised by the lab."""


class ConfigError(CMLError, ValueError):
    """Invalid experiment configuration; raised before any computation."""


class InvalidGeometryError(CMLError, ValueError):
    pass


class NumericError(CMLError, ArithmeticError):
    """A numerical failure during an otherwise valid computation."""


class NonLorentzianError(NumericError):
    pass


class SingularMetricError(NumericError):
    pass


class DivergenceError(NumericError):
    pass


class AlreadyMeasuredError(CMLError, RuntimeError):
    pass
