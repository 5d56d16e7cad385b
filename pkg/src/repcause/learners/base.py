"""Fitted-learner base: a prediction contract plus training diagnostics."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import DimensionError, NumericsError


@dataclass(frozen=True)
class Diagnostics:
    final_loss: float
    n_iter: int
    converged: bool


class FittedLearner:
    """A trained model; ``predict`` is a pure function of (parameters, x)."""

    def __init__(self, spec, n_features: int, diagnostics: Diagnostics):
        self.spec = spec
        self.n_features = n_features
        self.diagnostics = diagnostics

    def predict(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=np.float64)
        if x.ndim != 2:
            raise DimensionError(f"x must be 2-dimensional, got ndim={x.ndim}")
        if x.shape[1] != self.n_features:
            raise DimensionError(
                f"model was trained on {self.n_features} features, got {x.shape[1]}"
            )
        return self._predict(x)

    def _predict(self, x: np.ndarray) -> np.ndarray:
        raise NotImplementedError


def check_finite(*arrays) -> None:
    for a in arrays:
        if not np.all(np.isfinite(a)):
            raise NumericsError("non-finite values in learner input")


def as_xy(x, y) -> tuple[np.ndarray, np.ndarray]:
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if x.ndim != 2:
        raise DimensionError("x must be a 2-d matrix")
    if y.shape != (x.shape[0],):
        raise DimensionError("y must align with the rows of x")
    check_finite(x, y)
    return x, y
