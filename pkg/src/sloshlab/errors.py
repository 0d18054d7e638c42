"""Exception hierarchy shared by all sloshlab modules."""


class SloshError(Exception):
    """Base class for all sloshlab errors."""


class InvalidParameterError(SloshError, ValueError):
    """A scalar argument is outside its admissible range."""


class ClassViolationError(SloshError, ValueError):
    """A profile or domain fails the monotone-bottom class requirements."""


class UnsupportedDomainError(SloshError, ValueError):
    """The operation requires a domain this routine does not support."""


class IncompatibleRepresentationError(SloshError, ValueError):
    """Two star representations were built with different anchors or grids."""


class MeshingError(SloshError, RuntimeError):
    """The domain cannot be triangulated (degenerate profile, etc.)."""


class ResourceLimitError(SloshError, RuntimeError):
    """Refinement would exceed the supported cell-count budget."""


class AssemblyError(SloshError, RuntimeError):
    """Operator assembly is inconsistent with the mesh tagging."""


class InvalidProblemError(SloshError, ValueError):
    """The requested eigenproblem is ill-posed on this mesh."""


class DivisionGuardError(SloshError, ZeroDivisionError):
    """A Rayleigh quotient was requested for a vector with zero surface norm."""


class FactorizationError(SloshError, RuntimeError):
    """The interior block could not be factorized or solved to contract."""


class IllConditioningError(SloshError, RuntimeError):
    """The surface mass matrix is not numerically positive definite."""


class RangeError(SloshError, ValueError):
    """An evaluation point lies outside the supported range or domain."""


class NumericError(SloshError, ArithmeticError):
    """An iteration that must converge failed to converge."""


class UnsupportedMeshError(SloshError, ValueError):
    """The operation needs a structured mapped-grid mesh."""


class InvalidFieldError(SloshError, ValueError):
    """A nodal field is degenerate for the requested analysis."""


class InvalidFamilyError(SloshError, ValueError):
    """A domain family does not satisfy the nesting premise."""
