class QtelError(Exception):
    """
    Base class of every error raised on purpose by the simulator
    """


class ConfigError(QtelError, ValueError):
    pass


class OverdampedRegimeError(QtelError, ValueError):
    """
    4E² ≤ κ²: the mapping and entangling timing conditions have no real solution
    """


class NumericalError(QtelError, ArithmeticError):
    pass


class ContractViolation(QtelError, RuntimeError):
    """
    An operation was called outside of its precondition (e.g. correcting a
    failed protocol run)
    """
