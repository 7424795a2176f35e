"""Exception types shared across the engine."""


class MaskEditError(ValueError):
    """Base class for all engine errors."""


class DegenerateMaskError(MaskEditError):
    """Raised for zero-area shapes or empty masks where content is required."""


class DimensionMismatchError(MaskEditError):
    """Raised when grids, masks, or tensors disagree on shape."""


class UndefinedRatioError(MaskEditError):
    """Raised when a ratio has an empty denominator (e.g. occlusion of all-empty masks)."""


class LayerLookupError(MaskEditError):
    """Raised for out-of-range or forbidden layer indices."""


class NumericError(MaskEditError):
    """Raised when non-finite values appear inside the denoiser stack."""
