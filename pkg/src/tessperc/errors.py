"""Exception types shared across the package."""


class ParameterError(ValueError):
    """Invalid parameter (non-positive rate, degenerate window, bad buffer...)."""


class ConstructionError(RuntimeError):
    """Tessellation could not be built (degenerate generators etc.)."""


class EdgeEffectError(RuntimeError):
    """Buffer too small: a cell meeting the core window touches the sampling hull."""


class EstimatorFailure(RuntimeError):
    """An estimator produced a numerically unusable result (e.g. exp overflow)."""


class ConfigError(ValueError):
    """Invalid harness configuration file."""
