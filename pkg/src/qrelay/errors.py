"""Exception types shared across the simulator."""


class QRelayError(Exception):
    """Base class for all simulator errors."""


class RegistryMismatchError(QRelayError):
    """Two states or a state and an operation disagree about the mode registry."""


class TruncationOverflowError(QRelayError):
    """An operation would push the total photon number past n_max."""


class BinOverflowError(QRelayError):
    """A bin delay would move an occupied mode past the last registered bin."""


class UnnormalizedStateError(QRelayError):
    """A state (or ensemble) that must be normalized is not."""


class DimensionMismatchError(QRelayError):
    """A transform matrix does not match the number of listed modes."""


class TailMassError(QRelayError):
    """Truncating a pair-number distribution would discard too much probability."""


class ConfigError(QRelayError):
    """Bad configuration value or unknown configuration key."""


class InsufficientPointsError(QRelayError):
    """A fit was asked to run on too few points or too small a scan span."""


class FitConvergenceError(QRelayError):
    """An iterative fit failed to converge."""
