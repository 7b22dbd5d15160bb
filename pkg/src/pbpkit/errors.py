"""Exception hierarchy shared by all pbpkit modules."""


class PbpError(Exception):
    """Base class for every error raised by pbpkit."""


class DimensionError(PbpError, ValueError):
    """Operand shapes or lengths do not line up."""


class PermutationError(PbpError, ValueError):
    """An index array is not a bijection on ``0..n-1``."""


class PatternError(PbpError, ValueError):
    """A block pattern or layout request is malformed."""


class StrayNonzero(PbpError, ValueError):
    """A dense matrix has a nonzero outside the block pattern for the given pivots."""

    def __init__(self, row, col, value):
        self.row = row
        self.col = col
        self.value = value
        super().__init__(
            f"nonzero {value!r} at ({row}, {col}) falls outside the block pattern"
        )


class NoEliminableOutput(PbpError, ValueError):
    """Graph does not end in a PBP layer (optionally followed by softmax)."""


class FormatError(PbpError, ValueError):
    """A binary artifact has the wrong magic, version or truncated payload."""
