"""Exception hierarchy shared across the package.

The CLI maps these onto exit codes: usage problems are handled by the
argument parser itself, data/format problems exit 2, numerical failures
exit 3.
"""


class MfqeError(Exception):
    """Base class for all errors raised by this package."""


class ArgumentError(MfqeError, ValueError):
    """Invalid argument combination (mismatched lengths, bad ranges)."""


class ShapeError(ArgumentError):
    """Tensor or frame shapes are inconsistent with the operation."""


class VideoFormatError(MfqeError):
    """Malformed video container data."""


class TruncationError(VideoFormatError):
    """Stream ended inside a frame payload."""

    def __init__(self, message: str, frame_index: int):
        super().__init__(message)
        self.frame_index = frame_index


class DegenerateInputError(MfqeError, ValueError):
    """Input degenerate for a statistical fit (zero variance, one-sided)."""


class CheckpointFormatError(MfqeError):
    """Checkpoint container is malformed or incomplete."""


class TrainingDivergedError(MfqeError):
    """Training loss became non-finite; carries diagnostic state."""

    def __init__(self, message: str, step: int, recent_losses=None):
        super().__init__(message)
        self.step = step
        self.recent_losses = list(recent_losses or [])
