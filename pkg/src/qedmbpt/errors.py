"""Exception types shared across the package."""


class QedMbptError(Exception):
    """Base class for all package errors."""


class DegenerateEnergies(QedMbptError):
    """Two energies in a difference ratio are closer than the threshold."""


class SingularResolvent(QedMbptError):
    def __init__(self, index, energy):
        super().__init__(f"resolvent pole at Q-space index {index} (E={energy!r})")
        self.index = index
        self.energy = energy


class NoConvergence(QedMbptError):
    def __init__(self, iterations, residual, stage="iteration"):
        super().__init__(
            f"{stage} did not converge after {iterations} iterations "
            f"(residual {residual:.3e})"
        )
        self.iterations = iterations
        self.residual = residual
        self.stage = stage


class InvalidGrid(QedMbptError):
    pass


class SupercriticalZ(QedMbptError):
    pass


class DiagonalizationFailure(QedMbptError):
    pass


class SingularDenominator(QedMbptError):
    pass


class PoleOnGrid(QedMbptError):
    pass


class ConfigError(QedMbptError):
    def __init__(self, message, line=None, key=None):
        where = []
        if line is not None:
            where.append(f"line {line}")
        if key is not None:
            where.append(f"key {key!r}")
        prefix = f"[{', '.join(where)}] " if where else ""
        super().__init__(prefix + message)
        self.line = line
        self.key = key
