"""Exception hierarchy shared by all t2meval modules.

The CLI maps these onto process exit codes: ConfigError -> 2,
DataError/FormatError -> 3, NumericalError/TrainingError -> 4.
"""


class T2mEvalError(Exception):
    """Base class for all t2meval errors."""


class FormatError(T2mEvalError):
    """A file does not conform to its declared on-disk format."""


class DataError(T2mEvalError):
    """Input data violates a precondition (shape, range, finiteness)."""


class ConfigError(T2mEvalError):
    """A configuration value or combination is invalid."""


class ShapeError(DataError):
    """An array has the wrong dimensionality or width."""


class LengthError(DataError):
    """A sequence exceeds the admissible context length."""


class NumericalError(T2mEvalError):
    """A numerical routine left its domain of validity."""


class TrainingError(T2mEvalError):
    """An iterative fit diverged or failed to reach its target."""


class DegenerateBatchError(DataError):
    """A training batch carries zero total weight."""


class UndefinedCorrelation(T2mEvalError):
    """Correlation is undefined (a series is constant)."""
