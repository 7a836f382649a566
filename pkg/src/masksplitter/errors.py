class MaskSplitterError(ValueError):
    """Base class for validation failures raised by this package."""


class DimensionMismatchError(MaskSplitterError):
    pass


class UnknownInstanceError(MaskSplitterError):
    pass


class NoThresholdError(MaskSplitterError):
    """Raised when an image has a single intensity and cannot be split."""


class PGMFormatError(MaskSplitterError):
    pass
