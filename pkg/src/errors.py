"""Exception hierarchy shared by every package in the lab."""

from pathlib import Path
from typing import Optional, Sequence


class LabError(Exception):
    """Base class for all errors raised by the lab."""


class ConfigError(LabError):
    """Invalid model, training or experiment configuration."""

    def __init__(self, field: str, message: str):
        self.field = field
        super().__init__(f"{field}: {message}")


class DimensionError(LabError):
    """Operand shapes do not agree."""


class NumericError(LabError):
    """A forward value became NaN or infinite."""

    def __init__(self, message: str, task_index: Optional[int] = None):
        self.task_index = task_index
        if task_index is not None:
            message = f"task {task_index}: {message}"
        super().__init__(message)


class DataError(LabError):
    """Input data violates a content contract (labels, counts, numbers)."""


class AlignmentError(DataError):
    """Sample identifiers of two inputs cannot be matched one-to-one."""

    def __init__(self, message: str, orphans: Sequence[str] = ()):
        self.orphans = list(orphans)
        if self.orphans:
            message = f"{message}: {', '.join(self.orphans)}"
        super().__init__(message)


class FormatError(DataError):
    """A binary container is malformed (magic number, truncation)."""


class ContractError(LabError):
    """A caller broke an operation's precondition."""


class TrainingError(LabError):
    """Training aborted; records where and the last good checkpoint."""

    def __init__(
        self,
        message: str,
        epoch: int,
        step: int,
        checkpoint_path: Optional[Path] = None,
    ):
        self.epoch = epoch
        self.step = step
        self.checkpoint_path = checkpoint_path
        location = f"epoch {epoch}, step {step}"
        saved = f"; last good checkpoint: {checkpoint_path}" if checkpoint_path else ""
        super().__init__(f"{message} at {location}{saved}")
