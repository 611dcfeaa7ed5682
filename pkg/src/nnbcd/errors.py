"""Exception types shared across the package."""


class NNBCDError(Exception):
    """Base class for all package-specific errors."""


class ShapeMismatch(NNBCDError):
    pass


class NotPositiveDefinite(NNBCDError):
    pass


class RankTooLarge(NNBCDError):
    pass


class KernelTooLarge(NNBCDError):
    pass


class NonPositiveGamma(NNBCDError):
    pass


class BetaOutOfRange(NNBCDError):
    pass


class InvalidRankChain(NNBCDError):
    pass


class UnsupportedActivation(NNBCDError):
    pass


class UnsupportedLoss(NNBCDError):
    pass


class InfeasibleCompressedWeight(NNBCDError):
    pass


class HashMismatch(NNBCDError):
    pass


class ConfigError(NNBCDError):
    """Invalid run configuration; message names the offending key."""


class DataError(NNBCDError):
    pass


class BadMagic(DataError):
    pass


class TruncatedFile(DataError):
    pass


class CountMismatch(DataError):
    pass


class RaggedRows(DataError):
    pass


class NonNumericCell(DataError):
    pass
