"""Exception types shared across the engine."""


class TravsegError(Exception):
    """Base class for all errors raised by this package."""


class PrefsError(TravsegError, ValueError):
    """A prompt/weight list failed validation."""


class EmptyPromptError(PrefsError):
    pass


class DuplicatePromptError(PrefsError):
    pass


class WeightOutOfRangeError(PrefsError):
    pass


class ConfigError(TravsegError, ValueError):
    """An engine or file-level configuration value is invalid."""


class InvalidRoiError(ConfigError):
    """ROI polygon is malformed (too few vertices or self-intersecting)."""


class DegenerateRoiError(TravsegError):
    """ROI rasterization produced zero pixels at the requested resolution."""


class DimensionMismatchError(TravsegError, ValueError):
    """Two maps, masks, or vectors that must agree in shape do not."""


class EmptyInputError(TravsegError, ValueError):
    """An operation that needs at least one map/prompt received none."""


class EmptyRoiError(TravsegError, ValueError):
    """ROI mask has no set pixels, so a mean over it is undefined."""


class ZeroVectorError(TravsegError, ValueError):
    """Embedding with zero norm cannot participate in cosine similarity."""


class ProviderUnavailableError(TravsegError):
    """A mask/embedding provider could not be reached or failed hard."""


class MalformedResponseError(TravsegError):
    """Provider returned data violating the wire/shape/range contract."""


class FrameOrderError(TravsegError, ValueError):
    """Frame ids must strictly increase within an episode."""


class HocTimeoutError(TravsegError):
    """Operator did not answer a call within the configured timeout."""


class NoPendingRequestError(TravsegError):
    """resolve was invoked while no operator call is pending."""


class UnmappedClassError(TravsegError, ValueError):
    """Annotation contains class ids/colors absent from the label mapping."""

    def __init__(self, offending, message=None):
        self.offending = sorted(offending)
        super().__init__(message or f"annotation contains unmapped classes: {self.offending}")


class DecodeError(TravsegError):
    """An annotation or image raster could not be decoded."""
