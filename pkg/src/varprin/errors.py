"""Exception taxonomy.

Every numerical failure carries a short ``name`` that the CLI reports in its
JSON error object. Validation problems (bad input) and numerical problems
(coercivity, singularity, ...) are kept apart so the CLI can map them to
distinct exit codes.
"""


class VarprinError(Exception):
    name = "error"


class ValidationError(VarprinError, ValueError):
    """Malformed input: wrong shapes, missing boundary data, bad schema."""

    name = "validation"


class DimensionError(ValidationError):
    name = "dimension"


class BoundaryUnderspecifiedError(ValidationError):
    name = "boundary-underspecified"


class ConstraintError(ValidationError):
    """A trial field violates the pinned boundary data or a hard constraint."""

    name = "constraint"


class UnsupportedCouplingError(ValidationError):
    name = "unsupported-coupling"


class NumericalError(VarprinError, ArithmeticError):
    name = "numerical"


class CoercivityError(NumericalError):
    """The imaginary part of the (rotated) constitutive operator is not positive."""

    name = "coercivity"

    def __init__(self, message, cell=None, min_eig=None):
        super().__init__(message)
        self.cell = cell
        self.min_eig = min_eig


class InfeasibleRotationError(NumericalError):
    name = "infeasible-rotation"


class SingularSystemError(NumericalError):
    name = "singularity"


class InversionError(SingularSystemError):
    name = "inversion"


class NotConvexError(NumericalError):
    name = "not-convex"


class ConvergenceError(NumericalError):
    name = "convergence"


class DegeneratePrincipleError(NumericalError):
    name = "degenerate-principle"


class IncompatibleDataError(NumericalError):
    """Boundary data violate a compatibility condition implied by hard constraints."""

    name = "incompatible-data"


class NearLosslessBoundaryError(SingularSystemError):
    name = "near-lossless-boundary"


class OracleTooLargeError(NumericalError):
    name = "oracle-too-large"


class WrongPrincipleError(ValidationError):
    name = "wrong-principle"
