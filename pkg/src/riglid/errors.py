"""Shared exception types."""


class ConfigError(ValueError):
    """Invalid configuration value (grid sizes, parameter ranges, unknown keys)."""


class ShapeError(ValueError):
    """Array length does not match the grid it is paired with."""


class PreconditionError(ValueError):
    """Input violates a documented precondition (localization, gauge, height)."""


class AdmissibilityError(PreconditionError):
    """Water-height or Rayleigh-Taylor admissibility lost."""


class SolverError(RuntimeError):
    """Discrete solve failed to reach the requested tolerance."""


class QuadratureError(RuntimeError):
    """Adaptive quadrature failed to converge within its refinement budget."""


class GeometryError(RuntimeError):
    """Strip containment violated along a trajectory."""


class ContextError(ValueError):
    """Not enough trajectory context (time samples) for the requested quantity."""
