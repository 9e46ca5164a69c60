"""Exception types shared across the workbench."""


class ThermbenchError(Exception):
    """Base class for all workbench errors."""


class ParameterError(ThermbenchError, ValueError):
    """A physical parameter is non-finite, non-positive or otherwise invalid."""


class ShapeError(ThermbenchError, ValueError):
    """Vector dimensions disagree with the declared neighbor count."""


class HistoryUnderflowError(ThermbenchError, IndexError):
    """A regressor asked for a lag deeper than the stored history."""


class DivergenceError(ThermbenchError, ArithmeticError):
    """Simulation or rollout produced a non-finite value."""


class NumericalError(ThermbenchError, ArithmeticError):
    """A recursive update produced a non-finite estimate."""


class ConfigError(ThermbenchError, ValueError):
    """Configuration file or option set is inconsistent or incomplete."""
