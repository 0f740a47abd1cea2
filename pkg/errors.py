"""
Exception hierarchy for fracjac
"""


class FracJacError(Exception):
    """Base class for all fracjac errors"""


class InvalidGeometryError(FracJacError, ValueError):
    """Degenerate domain or set geometry"""


class InvalidParameterError(FracJacError, ValueError):
    """Numeric parameter outside its admissible range"""


class BoundaryProximityError(FracJacError):
    """Finite-difference stencil would leave the domain"""


class FieldLookupError(FracJacError, KeyError):
    """Unknown name in a field, test-function or change-of-variables library"""

    def __str__(self):
        return str(self.args[0]) if self.args else ""


class SingularPointError(FracJacError):
    """Evaluation exactly on the fiber u(x) = a"""


class BoundaryValueError(FracJacError):
    """Target lies on (or too close to) the image of the boundary"""


class SingularValueError(FracJacError):
    """Target is not a regular value"""


class CriticalLevelError(FracJacError):
    """Level is (numerically) a critical value of the test function"""


class UnsupportedTestFunctionError(FracJacError):
    """Test function kind not supported by the requested mode"""


class SingularCurveError(FracJacError):
    """Joint gradient lost rank while tracing a level curve"""

    def __init__(self, message: str, point=None):
        super().__init__(message)
        self.point = point


class IncompleteTraceError(FracJacError):
    """Some slice atoms were not reached by any traced curve"""

    def __init__(self, message: str, unmatched=None):
        super().__init__(message)
        self.unmatched = list(unmatched or [])


class ConfigError(FracJacError):
    """Malformed run configuration or option string"""

    def __init__(self, message: str, key: str = None):
        super().__init__(message)
        self.key = key
