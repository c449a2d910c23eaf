"""Exception hierarchy shared by all hplab modules."""


class HPLabError(Exception):
    """Base class for every error raised by hplab."""


class NumericalFailure(HPLabError):
    """A simulation or linear-algebra routine could not produce a finite result."""


class ConvergenceFailure(NumericalFailure):
    pass


class NegativeEigenvalue(NumericalFailure):
    pass


class SimulationOverflow(NumericalFailure):
    """Some state entry exceeded the overflow guard (default 1e150)."""


class CollisionAbort(NumericalFailure):
    """Ordered coordinates collided and local step halving could not repair it."""


class TailNotConverged(NumericalFailure):
    pass


class NormalizationFailure(NumericalFailure):
    pass


class InvalidStep(HPLabError, ValueError):
    pass


class InsufficientSample(HPLabError, ValueError):
    pass


class InsufficientHorizon(HPLabError, ValueError):
    pass


class ConfigError(HPLabError, ValueError):
    pass
