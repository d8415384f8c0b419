"""Exception hierarchy.  Each class carries the CLI exit code it maps to."""


class PointLcaError(Exception):
    exit_code = 2


class ValidationError(PointLcaError, ValueError):
    """Bad parameters or configuration."""

    exit_code = 1


class DataError(PointLcaError):
    """Input data that cannot be used."""

    exit_code = 2


class EventFormatError(DataError):
    def __init__(self, message, offset=None):
        if offset is not None:
            message = f"{message} (byte offset {offset})"
        super().__init__(message)
        self.offset = offset


class EmptyStreamError(DataError):
    pass


class FileFormatError(DataError):
    """Malformed weights, dictionary or feature file."""


class WeightsShapeError(FileFormatError):
    def __init__(self, layer, expected, got):
        super().__init__(f"shape mismatch in layer {layer!r}: expected {expected}, got {got}")
        self.layer = layer


class WeightsCorruptError(FileFormatError):
    def __init__(self, layer):
        super().__init__(f"non-finite value in layer {layer!r}")
        self.layer = layer


class ZeroNormFeatureError(DataError):
    def __init__(self, index):
        super().__init__(f"feature {index} has zero norm")
        self.index = index


class DegenerateInputError(DataError):
    pass


class NumericalError(PointLcaError):
    exit_code = 3


class NumericalOverflowError(NumericalError):
    pass


class LcaDivergenceError(NumericalError):
    def __init__(self, step, max_abs_u):
        super().__init__(f"LCA diverged at step {step} (max |u| = {max_abs_u:g})")
        self.step = step
        self.max_abs_u = max_abs_u
