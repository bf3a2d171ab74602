class EcharError(Exception):
    """Base class for errors raised by this package."""


class DimensionError(EcharError, ValueError):
    pass


class ParameterError(EcharError, ValueError):
    pass


class DegenerateError(EcharError):
    """Input carries no usable structure (flat histogram, empty skeleton, ...)."""


class CalibrationError(EcharError):
    pass


class GroundTruthParseError(EcharError):
    pass
