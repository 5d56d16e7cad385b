"""Nuisance learners: specs, fitting entry points and the generic
``fit``/``predict`` dispatch used by the estimators and the CLI."""
from __future__ import annotations

import numpy as np

from ..errors import InvalidSpecError
from .base import Diagnostics, FittedLearner
from .forest import ForestModel, fit_forest
from .linear import (
    ConstantModel,
    LinearModel,
    fit_lasso,
    fit_logistic,
    fit_logistic_l1,
    fit_mean,
    fit_ols,
    lasso_lambda_max,
    logistic_lambda_max,
)
from .mlp import AutoencoderModel, MlpModel, MlpNetwork, fit_autoencoder, fit_mlp
from .specs import (
    AutoencoderSpec,
    ForestSpec,
    LassoSpec,
    LearnerSpec,
    LogisticL1Spec,
    LogisticSpec,
    MeanSpec,
    MlpSpec,
    OlsSpec,
    default_penalty_grid,
    is_classifier,
)

__all__ = [
    "AutoencoderModel", "AutoencoderSpec", "ConstantModel", "Diagnostics",
    "FittedLearner", "ForestModel", "ForestSpec", "LassoSpec", "LearnerSpec",
    "LinearModel", "LogisticL1Spec", "LogisticSpec", "MeanSpec", "MlpModel",
    "MlpNetwork", "MlpSpec", "OlsSpec", "default_penalty_grid", "fit",
    "fit_autoencoder", "fit_forest", "fit_lasso", "fit_logistic",
    "fit_logistic_l1", "fit_mean", "fit_mlp", "fit_ols", "is_classifier",
    "lasso_lambda_max", "logistic_lambda_max", "make_spec", "predict",
]


def fit(spec, x, target) -> FittedLearner:
    """Train the learner described by ``spec`` on (x, target)."""
    kind = spec.kind
    if kind == "ols":
        return fit_ols(x, target, spec=spec)
    if kind == "mean":
        return fit_mean(x, target, spec=spec)
    if kind == "lasso":
        return fit_lasso(x, target, spec=spec)
    if kind == "logistic_l2":
        return fit_logistic(x, target, spec=spec)
    if kind == "logistic_l1":
        return fit_logistic_l1(x, target, spec=spec)
    if kind in ("mlp_reg", "mlp_clf"):
        return fit_mlp(x, target, spec)
    if kind in ("forest_reg", "forest_clf"):
        return fit_forest(x, target, spec)
    raise InvalidSpecError(f"unknown learner kind {kind!r}")


def predict(model: FittedLearner, x) -> np.ndarray:
    """Pure prediction; regression returns reals, classifiers return
    probabilities in [0, 1]."""
    return model.predict(np.asarray(x, dtype=np.float64))


_SPEC_BY_NAME = {
    "ols": OlsSpec,
    "mean": MeanSpec,
    "lasso": LassoSpec,
    "logistic": LogisticSpec,
    "logistic_l2": LogisticSpec,
    "logistic_l1": LogisticL1Spec,
    "lasso_logistic": LogisticL1Spec,
    "mlp": MlpSpec,
    "mlp_reg": MlpSpec,
    "mlp_clf": lambda **kw: MlpSpec(task="classification", **kw),
    "rf": ForestSpec,
    "forest": ForestSpec,
    "forest_reg": ForestSpec,
    "forest_clf": lambda **kw: ForestSpec(task="classification", **kw),
}


def make_spec(name: str, **hyper) -> LearnerSpec:
    """Build a learner spec from a CLI/config-style name."""
    key = name.strip().lower().replace("-", "_")
    factory = _SPEC_BY_NAME.get(key)
    if factory is None:
        raise InvalidSpecError(
            f"unknown learner {name!r}; expected one of {sorted(_SPEC_BY_NAME)}"
        )
    return factory(**hyper)
