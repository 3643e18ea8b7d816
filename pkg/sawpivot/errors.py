class SawError(Exception):
    """Base class of every error raised on purpose by sawpivot."""


class DimensionMismatchError(SawError, ValueError):
    pass


class InvalidLengthError(SawError, ValueError):
    pass


class CapacityError(SawError, RuntimeError):
    """A request would exceed a configured size cap.

    Args:
        what: what was being built (e.g. "walk enumeration").
        requested: size that was requested or reached.
        cap: the configured cap.
    """

    def __init__(self, what, requested, cap):
        self.what = what
        self.requested = requested
        self.cap = cap
        super().__init__(
            f"{what} exceeds capacity: {requested} > cap {cap}"
        )


class InvalidConfigurationError(SawError, ValueError):
    pass


class PartitionMismatchError(SawError, ValueError):
    pass


class StabilityError(SawError, ValueError):
    """A matrix is not [row]-stable on a column partition.

    `row_block` and `col_block` are the indices of the first offending pair.
    """

    def __init__(self, row_block, col_block, message=None):
        self.row_block = row_block
        self.col_block = col_block
        super().__init__(
            message
            or f"rows of block {row_block} have unequal sums over column block {col_block}"
        )


class WalkFormatError(SawError, ValueError):
    pass
