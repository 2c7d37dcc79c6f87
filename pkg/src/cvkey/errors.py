"""Exception types shared across the package."""


class DomainError(ValueError):
    """A parameter lies outside the physical or mathematical domain."""


class ContractError(ValueError):
    """An input violates a structural precondition (shape, symmetry, weights)."""


class NumericalError(ArithmeticError):
    """A computation produced a result outside its numerical tolerance."""


class DegenerateMeasurementError(DomainError):
    """Conditioning on a quadrature with zero variance."""


class DilationNotConfigured(NotImplementedError):
    """No validated symplectic construction is available for a channel class."""
