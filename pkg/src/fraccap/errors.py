"""Exception hierarchy shared by every fraccap module."""


class FraccapError(Exception):
    """Base class for all library errors."""

    category = "error"


class DomainError(FraccapError, ValueError):
    """Argument outside the supported domain of an operation."""

    category = "domain"


class PoleError(DomainError):
    """Gamma-type function evaluated at a non-positive integer."""

    category = "pole"


class ConvergenceError(FraccapError, ArithmeticError):
    """An iterative procedure or series did not reach its tolerance."""

    category = "convergence"


class SingularSystemError(FraccapError, ArithmeticError):
    """A linear system is singular (e.g. duplicated correction exponents)."""

    category = "singular"


class ConditioningError(SingularSystemError):
    """A linear system is too ill-conditioned to be trusted."""

    category = "conditioning"


class ConfigError(FraccapError):
    """Invalid run configuration (CLI level)."""

    category = "config"
