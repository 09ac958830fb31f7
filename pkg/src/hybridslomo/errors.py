"""Exception hierarchy. The CLI maps each class to a distinct exit code."""


class SlomoError(Exception):
    """Base class for all package errors."""


class ContractViolationError(SlomoError, ValueError):
    """An operation was called with inputs that violate its contract
    (shape mismatch, wrong channel count, out-of-range values, ...)."""


class FlowEstimationError(SlomoError):
    """A flow backend failed to produce a flow field."""


class InitializationError(SlomoError):
    """Weights for a pluggable backend could not be loaded."""


class HomographyEstimationError(SlomoError):
    """Too few or degenerate correspondences for homography fitting."""


class AlignmentError(SlomoError):
    """Temporal alignment of a dual-stream recording failed."""


class CheckpointError(SlomoError):
    """A checkpoint file is corrupt, truncated, or of a mismatched version."""


class TrainingDivergedError(SlomoError):
    """A non-finite loss was encountered; a diagnostic checkpoint was written."""


class JobError(SlomoError):
    """A reconstruction job has inconsistent streams or settings."""
