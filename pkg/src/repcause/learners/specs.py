"""Hyperparameter records for every nuisance learner.

Each spec is a frozen dataclass validated at construction; ``kind`` tags
match the names the CLI and estimator configs use.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence, Union

from ..errors import InvalidSpecError


@dataclass(frozen=True)
class OlsSpec:
    kind = "ols"


@dataclass(frozen=True)
class MeanSpec:
    """Intercept-only learner; predicts the training-target mean (or a
    fixed value), useful as a deliberately wrong nuisance."""

    value: float | None = None
    kind = "mean"


@dataclass(frozen=True)
class LassoSpec:
    """L1-penalized linear regression.

    ``lam`` fixes the penalty; otherwise 5-fold CV picks it from
    ``cv_grid`` (default: 50 log-spaced points from lambda_max down to
    1e-4 * lambda_max).
    """

    lam: float | None = None
    cv_grid: tuple[float, ...] | None = None
    cv_points: int = 50
    cv_floor: float = 1e-4
    seed: int = 0
    kind = "lasso"

    def __post_init__(self):
        if self.lam is not None and self.lam < 0:
            raise InvalidSpecError("lasso penalty must be >= 0")
        if self.cv_points < 1 or not 0.0 < self.cv_floor < 1.0:
            raise InvalidSpecError("need cv_points >= 1 and cv_floor in (0, 1)")
        if self.cv_grid is not None:
            grid = tuple(float(g) for g in self.cv_grid)
            if len(grid) == 0:
                raise InvalidSpecError("empty lasso cv grid")
            if any(g < 0 for g in grid):
                raise InvalidSpecError("lasso cv grid entries must be >= 0")
            object.__setattr__(self, "cv_grid", grid)


@dataclass(frozen=True)
class LogisticSpec:
    """Logistic regression fit by IRLS with an L2 penalty on all
    coefficients (including the intercept); lam=0 is the ILT-invariant
    unpenalized learner."""

    lam: float = 0.0
    kind = "logistic_l2"

    def __post_init__(self):
        if self.lam < 0:
            raise InvalidSpecError("logistic L2 penalty must be >= 0")


@dataclass(frozen=True)
class LogisticL1Spec:
    """L1-penalized logistic regression (proximal gradient); the intercept
    is unpenalized.  CV selection mirrors :class:`LassoSpec`."""

    lam: float | None = None
    cv_grid: tuple[float, ...] | None = None
    cv_points: int = 50
    cv_floor: float = 1e-4
    seed: int = 0
    kind = "logistic_l1"

    def __post_init__(self):
        if self.lam is not None and self.lam < 0:
            raise InvalidSpecError("logistic L1 penalty must be >= 0")
        if self.cv_points < 1 or not 0.0 < self.cv_floor < 1.0:
            raise InvalidSpecError("need cv_points >= 1 and cv_floor in (0, 1)")
        if self.cv_grid is not None:
            grid = tuple(float(g) for g in self.cv_grid)
            if len(grid) == 0:
                raise InvalidSpecError("empty logistic L1 cv grid")
            object.__setattr__(self, "cv_grid", grid)


@dataclass(frozen=True)
class MlpSpec:
    """Fully-connected ReLU network trained with Adam.

    ``depth`` counts hidden layers.  The default 4x50 keeps runs fast;
    ``depth=100, width=50`` reproduces the architecture used for the
    neural nuisance estimators at full size.
    """

    depth: int = 4
    width: int = 50
    activation: str = "relu"
    epochs: int = 100
    lr: float = 1e-3
    batch_size: int = 32
    val_fraction: float = 0.1
    patience: int = 10
    seed: int = 0
    task: str = "regression"

    def __post_init__(self):
        if self.depth < 1:
            raise InvalidSpecError("mlp depth must be >= 1")
        if self.width < 1:
            raise InvalidSpecError("mlp width must be >= 1")
        if self.epochs < 1 or self.batch_size < 1:
            raise InvalidSpecError("mlp epochs and batch size must be >= 1")
        if self.lr <= 0:
            raise InvalidSpecError("mlp learning rate must be > 0")
        if self.activation not in ("relu", "tanh", "linear"):
            raise InvalidSpecError(f"unknown activation {self.activation!r}")
        if self.task not in ("regression", "classification"):
            raise InvalidSpecError(f"unknown mlp task {self.task!r}")
        if not 0.0 < self.val_fraction < 0.5:
            raise InvalidSpecError("val fraction must lie in (0, 0.5)")

    @property
    def kind(self) -> str:
        return "mlp_reg" if self.task == "regression" else "mlp_clf"


@dataclass(frozen=True)
class AutoencoderSpec:
    """Symmetric bottleneck autoencoder: hidden widths are mirrored around
    a linear bottleneck, output layer linear."""

    hidden: tuple[int, ...] = (256, 64)
    activation: str = "relu"
    epochs: int = 150
    lr: float = 1e-3
    batch_size: int = 32
    val_fraction: float = 0.1
    patience: int = 10
    seed: int = 0
    kind = "autoencoder"

    def __post_init__(self):
        if any(w < 1 for w in self.hidden):
            raise InvalidSpecError("autoencoder hidden widths must be >= 1")
        if self.activation not in ("relu", "tanh", "linear"):
            raise InvalidSpecError(f"unknown activation {self.activation!r}")
        if self.epochs < 1 or self.batch_size < 1:
            raise InvalidSpecError("autoencoder epochs and batch size must be >= 1")
        if self.lr <= 0:
            raise InvalidSpecError("autoencoder learning rate must be > 0")


@dataclass(frozen=True)
class ForestSpec:
    """CART random forest with bootstrap rows and sqrt(d) feature
    subsampling per split."""

    n_trees: int = 50
    max_depth: int | None = None
    min_leaf: int = 5
    bootstrap: bool = True
    seed: int = 0
    task: str = "regression"

    def __post_init__(self):
        if self.n_trees < 1:
            raise InvalidSpecError("forest needs at least one tree")
        if self.min_leaf < 1:
            raise InvalidSpecError("min_leaf must be >= 1")
        if self.max_depth is not None and self.max_depth < 1:
            raise InvalidSpecError("max_depth must be >= 1 when set")
        if self.task not in ("regression", "classification"):
            raise InvalidSpecError(f"unknown forest task {self.task!r}")

    @property
    def kind(self) -> str:
        return "forest_reg" if self.task == "regression" else "forest_clf"


LearnerSpec = Union[
    OlsSpec, MeanSpec, LassoSpec, LogisticSpec, LogisticL1Spec, MlpSpec, ForestSpec
]

_CLASSIFIER_KINDS = frozenset({"logistic_l2", "logistic_l1", "mlp_clf", "forest_clf"})


def is_classifier(spec) -> bool:
    return spec.kind in _CLASSIFIER_KINDS


def default_penalty_grid(lam_max: float, n_points: int = 50, floor: float = 1e-4):
    """Log-spaced penalty path from lam_max down to floor * lam_max."""
    import numpy as np

    lam_max = max(lam_max, 1e-12)
    return tuple(np.geomspace(lam_max, floor * lam_max, n_points).tolist())
