"""Exception types raised by sepcore."""


class SepcoreError(Exception):
    """Base class for all sepcore errors."""


class NotPositiveDefinite(SepcoreError):
    """A Cholesky pivot fell below tolerance."""


class NegativeEigenvalue(SepcoreError):
    """An eigenvalue of a nominally PSD matrix is negative beyond tolerance."""


class InsufficientSamples(SepcoreError):
    """Sample size below the existence threshold for the Kronecker MLE."""


class SingularIterate(SepcoreError):
    """A flip-flop iterate lost positive definiteness."""


class SingularSample(SepcoreError):
    """The sample covariance is rank deficient where full rank is required."""


class IncompatibleParameters(SepcoreError):
    """Dimension triple incompatible with the requested core construction."""


class ConfigMismatch(SepcoreError):
    """Calibration metadata does not match the power-study configuration."""
