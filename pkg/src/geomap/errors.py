"""Exception hierarchy.

Every error carries a machine-readable ``code`` that the command-line front
end copies into its error reports.
"""


class GeomapError(Exception):
    code = "GEOMAP_ERROR"


class ExprSyntaxError(GeomapError, ValueError):
    code = "SYNTAX_ERROR"

    def __init__(self, message, position):
        super().__init__(f"{message} at position {position}")
        self.position = position


class VariableRangeError(GeomapError, ValueError):
    code = "VARIABLE_OUT_OF_RANGE"


class ExprDomainError(GeomapError, ArithmeticError):
    """Evaluation left the real domain of an operation (ln, sqrt, division)."""

    code = "EXPRESSION_DOMAIN"

    def __init__(self, message, subexpr=None, point=None):
        detail = message
        if subexpr is not None:
            detail += f" in '{subexpr}'"
        if point is not None:
            detail += f" at {[float(v) for v in point]}"
        super().__init__(detail)
        self.subexpr = subexpr
        self.point = point


class DimensionMismatchError(GeomapError, ValueError):
    code = "DIMENSION_MISMATCH"


class DegenerateMetricError(GeomapError, ArithmeticError):
    code = "DEGENERATE_METRIC"


class SignatureError(GeomapError, ValueError):
    code = "SIGNATURE_MISMATCH"


class ReconstructionSingularError(GeomapError, ArithmeticError):
    code = "RECONSTRUCTION_SINGULAR"


class NullTangentError(GeomapError, ArithmeticError):
    code = "NULL_TANGENT"


class TooFewPointsError(GeomapError, ValueError):
    code = "TOO_FEW_POINTS"


class IsotropicNormalError(GeomapError, ArithmeticError):
    code = "ISOTROPIC_NORMAL"


class CausticError(GeomapError, ArithmeticError):
    code = "CAUSTIC"


class GeodesicLeftDomainError(GeomapError, RuntimeError):
    code = "GEODESIC_LEFT_DOMAIN"


class PreconditionError(GeomapError, ValueError):
    """A harness was handed an instance outside its hypotheses."""

    code = "PRECONDITION_VIOLATION"


class GridSampledFieldError(GeomapError, TypeError):
    code = "GRID_SAMPLED_FIELD"


class JobError(GeomapError, ValueError):
    code = "INPUT_ERROR"
