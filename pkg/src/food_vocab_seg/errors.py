"""Exception hierarchy shared by every package module."""


class FoodSegError(Exception):
    """Base class for all errors raised by food_vocab_seg."""
    pass


class ShapeError(FoodSegError):
    """Raised when tensor shapes are incompatible."""
    pass


class InvalidInputError(FoodSegError):
    """Raised when values fall outside an operation's domain."""
    pass


class NonFiniteError(FoodSegError):
    """Raised when a forward value or loss is NaN or infinite."""
    pass


class GradCheckError(FoodSegError):
    """Raised when a finite-difference check cannot be evaluated."""
    pass


class ArchiveError(FoodSegError):
    """Raised when a parameter archive cannot be read or does not fit the model."""
    pass


class TokenizerError(FoodSegError):
    """Raised for malformed vocabularies or templates."""
    pass


class RegimeError(FoodSegError):
    """Raised when an attention regime does not fit the token layout."""
    pass


class BatchError(FoodSegError):
    """Raised when a batch cannot support the requested objective."""
    pass


class MatchingError(FoodSegError):
    """Raised when proposals cannot be assigned to targets."""
    pass


class SplitError(FoodSegError):
    """Raised for invalid base/novel class splits."""
    pass


class DatasetError(FoodSegError):
    """Raised when a dataset directory is missing, malformed or already exists."""
    pass


class ConfigError(FoodSegError):
    """Raised for invalid run configuration."""
    pass


class ConvergenceError(FoodSegError):
    """Raised when a training stage fails to reach its target quality."""
    pass


class CheckpointMismatchError(FoodSegError):
    """Raised when a checkpoint disagrees with the split or vocabulary in use."""
    pass
