"""Exception types shared across the package."""


class HardyLabError(Exception):
    """Base class for all package errors."""


class MetricViolation(HardyLabError):
    """Distance matrix is not a metric (symmetry, positivity, triangle)."""


class MeasureViolation(HardyLabError):
    """Non-positive point weight."""


class DegenerateRange(HardyLabError):
    """Radius range empty after clipping."""


class NotSelfAdjoint(HardyLabError):
    """Operator kernel is not symmetric."""


class NegativeSpectrum(HardyLabError):
    """Eigenvalue below -tol * spectral radius."""


class KernelNotTrivial(HardyLabError):
    """Smallest eigenvalue within tolerance of zero and no handling requested."""


class MultiplierDomainError(HardyLabError):
    """Multiplier undefined at some eigenvalue."""


class UnboundedFit(HardyLabError):
    """No (C, c) pair on the search grid satisfies the target inequality."""


class QuadratureTooCoarse(HardyLabError):
    """Discretization error bound exceeds the requested gate."""


class AtomInfeasible(HardyLabError):
    """Constraint nullspace for atom construction is trivial."""


class SupportOverflow(HardyLabError):
    """Function not negligible at the edge of the sampling window."""


class SobolevGate(HardyLabError):
    """Dyadic Sobolev bound fails beyond the allowed slack."""


class UnknownBuilder(HardyLabError):
    """Model spec names no known builder."""


class NegativePotential(HardyLabError):
    """Schrodinger potential has negative entries."""


class ConfigError(HardyLabError):
    """Experiment configuration fails validation."""
