"""Exception types raised across the package."""


class DegenerateCoefficientError(ValueError):
    """A diffusion coefficient is not strictly positive."""


class SolverError(RuntimeError):
    """An iterative solve missed its tolerance."""

    def __init__(self, message, residual=None):
        super().__init__(message)
        self.residual = residual


class NonPositiveEmbeddingError(RuntimeError):
    """Circulant embedding produced significantly negative eigenvalues."""

    def __init__(self, message, suggested_factor=None):
        super().__init__(message)
        self.suggested_factor = suggested_factor


class DependentSensorsError(ValueError):
    """Riesz representers are numerically linearly dependent."""

    def __init__(self, message, index=None):
        super().__init__(message)
        self.index = index


class UnrecoverableSpaceError(ValueError):
    """The reduced space meets the orthogonal complement of the measurement space."""


class UndefinedMetricError(ValueError):
    """A relative metric has a zero denominator."""


class TrainingDivergedError(FloatingPointError):
    """The training loss became non-finite."""

    def __init__(self, message, step=None, loss=None):
        super().__init__(message)
        self.step = step
        self.loss = loss


class FormatError(ValueError):
    """A binary artifact has a bad header or is truncated."""


class ConfigError(ValueError):
    """An experiment configuration is malformed."""


class ArtifactMismatchError(ValueError):
    """A cached artifact does not match the configuration it is used with."""
