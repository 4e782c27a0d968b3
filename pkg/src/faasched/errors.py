"""Exception types shared across the simulator."""


class SimulatorError(Exception):
    """Base class for all errors raised by this package."""


class InvalidIntensity(SimulatorError):
    """Load intensity is negative or not a multiple of 10."""


class UnknownFunction(SimulatorError):
    """A function name or index is not part of the catalog."""


class ClockRegression(SimulatorError):
    """A receipt timestamp went backwards within one run."""


class NotApplicable(SimulatorError):
    """An operation was invoked for a strategy that does not support it."""


class WarmupInfeasible(SimulatorError):
    """The memory pool cannot hold one container per catalog function."""


class SimulationStuck(SimulatorError):
    """The event loop exceeded its budget or drained with work pending."""


class MissingBaseline(SimulatorError):
    """No idle-system median is known for a function when computing stretch."""


class EmptyInput(SimulatorError):
    """A summary was requested for an empty value set."""


class ConfigError(SimulatorError):
    """An experiment configuration failed validation.

    The message names the offending field path, e.g. ``matrix.intensities``.
    """
