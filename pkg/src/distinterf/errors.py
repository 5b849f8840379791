"""Exception hierarchy shared by every module."""


class DistinterfError(Exception):
    """Base class for all package errors."""


class UndefinedPhase(DistinterfError):
    """A collective phase was requested around a cycle with a missing edge."""

    def __init__(self, edge, modulus):
        self.edge = tuple(edge)
        self.modulus = float(modulus)
        super().__init__(
            f"phase undefined: edge {self.edge} has modulus {self.modulus:.3g}"
        )


class InfeasibleTiming(DistinterfError):
    pass


class DimensionError(DistinterfError, ValueError):
    pass


class NonHermitianInput(DistinterfError, ValueError):
    pass


class NegativeProbability(DistinterfError):
    pass


class CapacityError(DistinterfError):
    pass


class MissingData(DistinterfError):
    pass


class DegenerateFit(DistinterfError):
    pass
