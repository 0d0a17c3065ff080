"""Exception hierarchy shared across the toolkit.

ValidationError maps to CLI exit code 1, everything else that escapes maps
to exit code 2.
"""


class FaithFillError(Exception):
    """Base class for all toolkit errors."""


class ValidationError(FaithFillError):
    """Bad inputs, bad config, bad on-disk data. CLI exit code 1."""


class BackendError(FaithFillError):
    """A pluggable backend failed or is not bound in this environment."""

    def __init__(self, backend: str, message: str):
        self.backend = backend
        super().__init__(f"[{backend}] {message}")


class SegmentationEmptyError(BackendError):
    """The segmenter found no object pixels. Never silently all-zero."""

    def __init__(self, backend: str, message: str = "segmentation empty: no object pixels found"):
        super().__init__(backend, message)


class PipelineError(FaithFillError):
    """A finetune/inference stage failed; carries stage name and iteration."""

    def __init__(self, stage: str, message: str, iteration: int | None = None):
        self.stage = stage
        self.iteration = iteration
        where = f"stage={stage}" if iteration is None else f"stage={stage} iteration={iteration}"
        super().__init__(f"{where}: {message}")
