from __future__ import annotations

from contextlib import contextmanager
from typing import Iterator


class AuditError(Exception):
    """Root of every error raised by the toolkit."""

    exit_code: int = 1
    window_id: str | None = None


class ConfigurationError(AuditError, ValueError):
    exit_code = 1


class DataError(AuditError, ValueError):
    exit_code = 2


class ParseError(DataError):
    def __init__(self, message: str, line: int | None = None) -> None:
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class EmptyDatasetError(DataError):
    pass


class DegenerateDatasetError(DataError):
    pass


class DimensionError(AuditError, ValueError):
    exit_code = 2


class NumericError(AuditError, ArithmeticError):
    exit_code = 3


class DivergenceError(NumericError):
    def __init__(self, epoch: int, loss: float) -> None:
        self.epoch = epoch
        self.loss = loss
        super().__init__(f"training diverged at epoch {epoch} (loss={loss})")


class ContractError(AuditError, RuntimeError):
    exit_code = 3


class CoordinateError(AuditError):
    """Wraps a failure with the experiment coordinate it happened at."""

    def __init__(
        self,
        cause: AuditError,
        dataset: str,
        model: str | None = None,
        explainer: str | None = None,
        window_id: str | None = None,
    ) -> None:
        self.cause = cause
        self.dataset = dataset
        self.model = model
        self.explainer = explainer
        self.window_id = window_id if window_id is not None else cause.window_id
        self.exit_code = cause.exit_code
        super().__init__(f"{self.coordinate()}: {type(cause).__name__}: {cause}")

    def coordinate(self) -> str:
        parts = [f"dataset={self.dataset}"]
        if self.model is not None:
            parts.append(f"model={self.model}")
        if self.explainer is not None:
            parts.append(f"explainer={self.explainer}")
        if self.window_id is not None:
            parts.append(f"window={self.window_id}")
        return " ".join(parts)

    def as_dict(self) -> dict[str, str | None]:
        return {
            "dataset": self.dataset,
            "model": self.model,
            "explainer": self.explainer,
            "window_id": self.window_id,
            "error": type(self.cause).__name__,
            "message": str(self.cause),
        }


@contextmanager
def at_window(window_id: str) -> Iterator[None]:
    """Tag an ``AuditError`` raised inside the block with the window it concerns."""
    try:
        yield
    except AuditError as exc:
        if exc.window_id is None:
            exc.window_id = window_id
        raise
