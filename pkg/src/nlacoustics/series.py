"""Sampled discrepancy series and fitted envelope results."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import numpy.typing as npt

from .errors import ValidationError


@dataclass(frozen=True)
class ErrorSeries:
    """Discrepancy samples E(t) along a march variable."""

    t: npt.NDArray[np.float64]
    e: npt.NDArray[np.float64]
    eps: float = 0.0
    delta: float = 0.0
    meta: dict = field(default_factory=dict)

    def __post_init__(self) -> None:
        t = np.asarray(self.t, dtype=np.float64)
        e = np.asarray(self.e, dtype=np.float64)
        if t.shape != e.shape or t.ndim != 1:
            raise ValidationError("t and E must be 1-d arrays of equal length")
        if t.size >= 2 and not np.all(np.diff(t) > 0):
            raise ValidationError("t samples must be strictly increasing")
        if np.any(e < 0):
            raise ValidationError("E samples must be nonnegative")
        t = t.copy()
        e = e.copy()
        t.setflags(write=False)
        e.setflags(write=False)
        object.__setattr__(self, "t", t)
        object.__setattr__(self, "e", e)

    def max(self) -> float:
        return float(np.max(self.e))

    def with_meta(self, eps: float | None = None, delta: float | None = None) -> "ErrorSeries":
        return ErrorSeries(
            self.t,
            self.e,
            self.eps if eps is None else eps,
            self.delta if delta is None else delta,
            dict(self.meta),
        )


@dataclass(frozen=True)
class FitResult:
    """Envelope constants or a log-log slope, with the fit residual."""

    c1: float | None = None
    c2: float | None = None
    slope: float | None = None
    intercept: float | None = None
    residual: float = 0.0
    exact_match: bool = False
