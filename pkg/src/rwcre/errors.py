"""Exception types raised by the library."""


class RwcreError(Exception):
    """Base class for all library errors."""


class ConfigError(RwcreError):
    """Invalid input; ``path`` locates the offending config field when known."""

    def __init__(self, message, path=None):
        self.message = message
        self.path = path
        super().__init__(message if path is None else f"{path}: {message}")

    def relocate(self, prefix: str) -> "ConfigError":
        """Re-root ``path`` under ``prefix`` (``atoms[0]`` -> ``law.atoms[0]``)."""
        self.path = prefix if not self.path else f"{prefix}.{self.path}"
        self.args = (f"{self.path}: {self.message}",)
        return self


class DegenerateLaw(ConfigError):
    pass


class EllipticityViolation(ConfigError):
    """An atom sits at 0 or 1 (or outside the ellipticity band)."""

    def __init__(self, message, path=None, index=None):
        self.index = index
        super().__init__(message, path)


class BracketFailure(RwcreError):
    pass


class BudgetTooSmall(RwcreError):
    pass


class EffectiveSampleCollapse(RwcreError):
    """Log-mean-exp dominated by a single replica."""


class UnboundedSupport(RwcreError):
    pass


class QuadratureFailure(RwcreError):
    pass
