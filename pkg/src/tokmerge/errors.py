"""Exception and warning types shared across the package."""


class TokMergeError(Exception):
    """Base class for all errors raised by this package."""


class NonFiniteInput(TokMergeError):
    """Input array contains NaN or Inf."""


class InvalidShape(TokMergeError):
    """Array shape is empty or incompatible with the operation."""


class InvalidProbability(TokMergeError):
    """Row is not a probability distribution (negative entry or bad sum)."""


class InvalidTemperature(TokMergeError):
    """Softmax temperature must be strictly positive."""


class InvalidBudget(TokMergeError):
    """Requested token budget is outside [1, N]."""


class InvalidPrefix(TokMergeError):
    """Decoder prefix is empty or exceeds the model context."""


class InvalidDirection(TokMergeError):
    """A decoder with the wrong direction tag was supplied."""


class DegenerateCluster(TokMergeError):
    """Cluster has non-positive total mass; weighted average undefined."""


class DivergedTraining(TokMergeError):
    """Training loss became NaN. Carries the epoch index."""

    def __init__(self, epoch: int):
        self.epoch = epoch
        super().__init__(f"training diverged (NaN loss) at epoch {epoch}")


class NotNpy(TokMergeError):
    """File is not a supported NPY v1.0 file."""


class UnsupportedLayout(TokMergeError):
    """NPY file uses Fortran order; only C order is supported."""


class UnsupportedDtype(TokMergeError):
    """NPY dtype is not '<f4' or '<f8'."""


class PayloadTruncated(TokMergeError):
    """NPY payload length does not match the header shape."""


class PipelineError(TokMergeError):
    """Error raised inside a pipeline stage; carries the stage label."""

    def __init__(self, stage: str, cause: Exception):
        self.stage = stage
        self.cause = cause
        super().__init__(f"stage '{stage}': {cause}")


class DegenerateWarning(UserWarning):
    """A degenerate input was handled by a documented convention."""
