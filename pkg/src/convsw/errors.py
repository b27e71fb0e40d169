class CSWError(Exception):
    """Base class for all errors raised by convsw."""


class ShapeError(CSWError, ValueError):
    """Tensor shapes or convolution geometry are inconsistent."""


class FormatError(CSWError, ValueError):
    """A file does not follow its declared binary layout."""


class CapacityError(CSWError, ValueError):
    """Problem too large for an exact (assignment-based) solver."""
