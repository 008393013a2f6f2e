"""Exception types shared across the package."""


class CodecError(Exception):
    """Base class for all cpscodec errors."""


class ContractViolation(CodecError):
    """An operation was called with arguments that break its contract."""


class SizingError(CodecError):
    """A layer's input is too small (or misaligned) for its kernel/stride."""


class CoverageError(CodecError):
    """A set of tiles fails to cover the target exactly once."""


class PlanError(CodecError):
    """Tiling constraints cannot be satisfied for the given geometry."""


class FormatError(CodecError):
    """A serialized artifact (weights, bitstream, image) is malformed."""


class DecodeError(CodecError):
    """An entropy-coded payload cannot be decoded."""


class VerifyMismatch(CodecError):
    """An equivalence check found differing values."""
