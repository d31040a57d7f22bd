"""Exception types shared across the package."""

from __future__ import annotations

import numpy as np


class ConfigurationError(ValueError):
    """A configuration value violates a documented precondition."""


class DataError(ValueError):
    """A dataset request cannot be satisfied (e.g. not enough samples)."""


class IdxFormatError(ValueError):
    """An IDX file is malformed: bad magic, truncation, or count mismatch."""


class SolverError(RuntimeError):
    """An iterative solver failed to reach its tolerance.

    Carries the last iterate and its gradient norm so callers can inspect
    or resume.
    """

    def __init__(self, message: str, last_iterate: np.ndarray, grad_norm: float):
        super().__init__(message)
        self.last_iterate = last_iterate
        self.grad_norm = grad_norm
