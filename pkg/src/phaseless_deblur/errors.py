"""Exception types shared across the package."""


class PhaselessDeblurError(Exception):
    """Base class for all package-specific errors."""


class DimensionMismatch(PhaselessDeblurError):
    """Operand shapes are incompatible."""


class EmptyMeasurement(PhaselessDeblurError):
    """A measurement operator would produce zero samples."""


class NonFiniteOutput(PhaselessDeblurError):
    """A computation produced NaN or Inf where finite values are required."""


class NonFiniteLoss(PhaselessDeblurError):
    """The objective became NaN or Inf during optimization."""


class BadMagic(PhaselessDeblurError):
    """A binary file does not start with the expected magic bytes."""


class BadCrc(PhaselessDeblurError):
    """A binary file failed its CRC32 integrity check."""


class DimChainMismatch(PhaselessDeblurError):
    """Layer input/output dimensions do not chain consistently."""


class UnknownLayerKind(PhaselessDeblurError):
    """A serialized layer kind tag is not recognized."""


class BadSize(PhaselessDeblurError):
    """A kernel size parameter is invalid."""


class BadLength(PhaselessDeblurError):
    """A motion-blur trajectory length is not realizable on the canvas."""


class KernelTooLarge(PhaselessDeblurError):
    """A kernel does not fit inside the target grid."""


class TooSmall(PhaselessDeblurError):
    """An image is smaller than the metric window."""


class ConfigError(PhaselessDeblurError):
    """An experiment configuration is invalid or inconsistent."""
