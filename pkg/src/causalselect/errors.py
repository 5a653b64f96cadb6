"""Exception types shared across the package."""


class CausalSelectError(Exception):
    """Base class for every error raised by this library."""


class ConfigurationError(CausalSelectError, ValueError):
    """A config object or function argument is outside its valid domain."""


class DataError(CausalSelectError, ValueError):
    """A dataset is malformed or lacks required columns."""


class DegenerateDataError(DataError):
    """The data lacks the variation a fit needs (e.g. a single class)."""


class NumericalError(CausalSelectError, RuntimeError):
    """A numerical routine failed (singular system, non-finite result)."""
