"""Exception types raised by the codec.

Every failure a caller can provoke with bad input (parameters, clouds,
streams, files) is reported as an ``HPSRError`` subclass. They derive from
``ValueError`` so plain ``except ValueError`` handlers keep working.
"""


class HPSRError(ValueError):
    """Base class for all codec errors."""


class GeometryError(HPSRError):
    """Invalid voxel coordinates, grids or scale factors."""


class ParameterError(HPSRError):
    """Codec parameters outside their valid ranges."""


class MalformedStreamError(HPSRError):
    """A base-cloud substream that cannot be decoded."""


class PriorDesyncError(HPSRError):
    """The prior substream does not match the clusters the decoder derived."""


class ContainerError(HPSRError):
    """A container that is not a valid HPSR stream."""


class PlyFormatError(HPSRError):
    """A PLY file that cannot be parsed."""


class MetricError(HPSRError):
    """Metric inputs that cannot be evaluated."""
