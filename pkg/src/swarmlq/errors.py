"""Exception types shared across the library."""


class NumericalError(RuntimeError):
    """A numerical invariant was violated (crossing characteristics,
    monotonicity loss, tolerance breach).  Carries the offending module
    and the tolerance so the CLI can report them."""

    def __init__(self, module, message, tolerance=None):
        self.module = module
        self.tolerance = tolerance
        tol = f" (tolerance {tolerance:g})" if tolerance is not None else ""
        super().__init__(f"[{module}] {message}{tol}")


class ConfigError(ValueError):
    """Invalid or incomplete scenario configuration."""
