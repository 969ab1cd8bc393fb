"""Exception types shared across the package."""


class ShapeError(ValueError):
    """Operands have incompatible dimensions or (n, k) shapes."""


class NotPSDError(ValueError):
    """A matrix expected to be positive semidefinite has a negative eigenvalue."""

    def __init__(self, eigenvalue, message=None):
        self.eigenvalue = float(eigenvalue)
        super().__init__(message or f"matrix is not PSD: eigenvalue {self.eigenvalue:.3e}")


class EigenError(RuntimeError):
    """Eigendecomposition failed to converge or reconstruct its input."""

    def __init__(self, residual, message=None):
        self.residual = float(residual)
        super().__init__(message or f"eigendecomposition failed, residual {self.residual:.3e}")


class FormatError(ValueError):
    """Malformed text input. ``lineno`` is 1-based, or None when not line-specific."""

    def __init__(self, message, lineno=None):
        self.lineno = lineno
        where = f"line {lineno}: " if lineno is not None else ""
        super().__init__(where + message)


class BudgetError(RuntimeError):
    """A brute-force computation would exceed its size guard."""
