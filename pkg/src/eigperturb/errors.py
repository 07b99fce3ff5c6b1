"""Exception hierarchy. Each class carries the CLI exit code it maps to."""


class EigPerturbError(Exception):
    exit_code = 1


class SpecError(EigPerturbError, ValueError):
    """Malformed Jordan data, config or input shapes."""

    exit_code = 2


class StructureError(EigPerturbError):
    """A matrix fails its structural identity (Δ-Hermitian, Hamiltonian, ...)."""

    exit_code = 3

    def __init__(self, message, residual=None):
        super().__init__(message)
        self.residual = residual


class SingularMatrixError(EigPerturbError, ArithmeticError):
    """Raised by the backend solver; `pivot` is the smallest |U_ii| seen."""

    exit_code = 4

    def __init__(self, message, pivot=None):
        super().__init__(message)
        self.pivot = pivot


class NonGenericError(EigPerturbError):
    """The perturbation violates the W_k nonsingularity assumption at index k."""

    exit_code = 4

    def __init__(self, k, cond, message=None):
        self.k = k
        self.cond = cond
        super().__init__(message or f"W_{k} is singular or ill-conditioned (cond={cond:.3g})")


class ClusterError(EigPerturbError):
    exit_code = 5

    def __init__(self, message, expected=None, found=None):
        super().__init__(message)
        self.expected = expected
        self.found = found
