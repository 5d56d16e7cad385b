"""ATE estimators: naive difference, oracle adjustment, S-Learner, and the
cross-fitted DML estimators (AIPW interactive score and partialling-out).

The AIPW per-unit score is

    rho_i = g1_i - g0_i + t_i (y_i - g1_i) / m_i - (1 - t_i)(y_i - g0_i) / (1 - m_i)

evaluated with out-of-fold nuisance fits and clipped propensities; the
estimate is the mean score, its variance the sample variance of the scores.
The sign of the control-arm residual term is the one that makes the score
doubly robust: with either nuisance correct, E[rho] equals the target.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy import stats

from .data import FoldAssignment, RepresentationSet, make_folds
from .errors import (
    CollinearityError,
    DegenerateResidualizationError,
    EmptyArmError,
    OverlapWarning,
    ValidationError,
)
from .learners import FittedLearner, fit, predict

CLIP_EPS_DEFAULT = 0.01
OVERLAP_WARN_FRACTION = 0.2


@dataclass
class AteReport:
    """Point estimate with normal-quantile confidence interval."""

    method: str
    estimate: float
    std_error: float
    ci_low: float
    ci_high: float
    level: float = 0.95
    per_fold_estimates: list = field(default_factory=list)
    n_used: int = 0
    warnings: list = field(default_factory=list)

    def __post_init__(self):
        if self.std_error < 0:
            raise ValidationError("std_error must be >= 0")
        if not (self.ci_low <= self.estimate <= self.ci_high):
            raise ValidationError("confidence interval must contain the estimate")

    def to_json_dict(self) -> dict:
        return {
            "method": self.method,
            "estimate": self.estimate,
            "std_error": self.std_error,
            "ci_low": self.ci_low,
            "ci_high": self.ci_high,
            "level": self.level,
            "n": self.n_used,
            "folds": list(self.per_fold_estimates),
            "warnings": list(self.warnings),
        }


def _z_quantile(level: float) -> float:
    if not 0.0 < level < 1.0:
        raise ValidationError("confidence level must lie in (0, 1)")
    return float(stats.norm.ppf(0.5 * (1.0 + level)))


def _report(method, estimate, std_error, level, *, folds=(), n=0, warn=()):
    z = _z_quantile(level)
    return AteReport(
        method=method,
        estimate=float(estimate),
        std_error=float(std_error),
        ci_low=float(estimate - z * std_error),
        ci_high=float(estimate + z * std_error),
        level=level,
        per_fold_estimates=[float(v) for v in folds],
        n_used=int(n),
        warnings=list(warn),
    )


def _split_arms(t, y):
    t = np.asarray(t, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    treated = t == 1.0
    if not treated.any() or treated.all():
        raise EmptyArmError("both treatment arms must be non-empty")
    return t, y, y[treated], y[~treated]


def naive_ate(t, y, level: float = 0.95) -> AteReport:
    """Unadjusted difference in arm means with the unequal-variance
    two-sample standard error."""
    t, y, y1, y0 = _split_arms(t, y)
    estimate = y1.mean() - y0.mean()
    var1 = y1.var(ddof=1) if len(y1) > 1 else 0.0
    var0 = y0.var(ddof=1) if len(y0) > 1 else 0.0
    se = float(np.sqrt(var1 / len(y1) + var0 / len(y0)))
    warn = ["degenerate_zero_variance"] if se == 0.0 else []
    return _report("naive", estimate, se, level, n=len(y), warn=warn)


def oracle_ate(t, y, label, level: float = 0.95) -> AteReport:
    """OLS of y on treatment and the true confounder label; reports the
    treatment coefficient with its homoskedastic standard error."""
    t = np.asarray(t, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    label = np.asarray(label, dtype=np.float64)
    if not (t == 1.0).any() or not (t == 0.0).any():
        raise EmptyArmError("both treatment arms must be non-empty")
    cols = [np.ones_like(t), t, label]
    if np.all(label == label[0]):
        cols = cols[:2]  # constant label adds nothing; reduce to y ~ 1 + t
    a = np.column_stack(cols)
    q, r = np.linalg.qr(a)
    diag = np.abs(np.diag(r))
    if diag.min() <= 1e-10 * diag.max():
        raise CollinearityError("treatment and label are collinear")
    beta = np.linalg.solve(r, q.T @ y)
    resid = y - a @ beta
    dof = max(len(y) - a.shape[1], 1)
    sigma2 = float(resid @ resid) / dof
    cov = sigma2 * np.linalg.inv(r.T @ r)
    se = float(np.sqrt(cov[1, 1]))
    return _report("oracle", beta[1], se, level, n=len(y))


def s_learner_ate(dataset: RepresentationSet, spec, level: float = 0.95
                  ) -> AteReport:
    """Single outcome model with the treatment indicator as a feature,
    averaged plug-in contrasts g(1, z) - g(0, z).

    The reported standard error (sample sd of the unit contrasts / sqrt n)
    ignores nuisance estimation noise and is anti-conservative.
    """
    t, y = dataset.require_ty()
    if not (t == 1).any() or not (t == 0).any():
        raise EmptyArmError("both treatment arms must be non-empty")
    features = np.column_stack([t.astype(np.float64), dataset.z])
    model = fit(spec, features, y)
    ones = np.ones((dataset.n, 1))
    zeros = np.zeros((dataset.n, 1))
    contrasts = predict(model, np.hstack([ones, dataset.z])) - predict(
        model, np.hstack([zeros, dataset.z])
    )
    estimate = float(contrasts.mean())
    se = float(contrasts.std(ddof=1) / np.sqrt(dataset.n))
    warn = ["degenerate_zero_variance"] if se == 0.0 else []
    return _report("s_learner", estimate, se, level, n=dataset.n, warn=warn)


# --- DML (AIPW, interactive score) -------------------------------------------


def evaluate_score(t, y, g1, g0, m_clipped) -> np.ndarray:
    """Per-unit orthogonalized scores; ``m_clipped`` must lie in (0, 1)."""
    t = np.asarray(t, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    g1 = np.asarray(g1, dtype=np.float64)
    g0 = np.asarray(g0, dtype=np.float64)
    m = np.asarray(m_clipped, dtype=np.float64)
    if not (t.shape == y.shape == g1.shape == g0.shape == m.shape):
        raise ValidationError("score inputs must be aligned 1-d arrays")
    if np.any(m <= 0.0) or np.any(m >= 1.0):
        raise ValidationError("propensities must lie strictly inside (0, 1)")
    return g1 - g0 + t * (y - g1) / m - (1.0 - t) * (y - g0) / (1.0 - m)


@dataclass
class FoldNuisances:
    fold: int
    g1: FittedLearner
    g0: FittedLearner
    m: FittedLearner


def fit_fold_nuisances(dataset: RepresentationSet, folds: FoldAssignment,
                       g_spec, m_spec) -> list[FoldNuisances]:
    """Fit arm-specific outcome models and the propensity model for every
    fold using out-of-fold rows only."""
    t, y = dataset.require_ty()
    models = []
    for fold in range(folds.k):
        train = folds.complement(fold)
        tr_t = t[train]
        treated = train[tr_t == 1]
        control = train[tr_t == 0]
        if len(treated) == 0 or len(control) == 0:
            raise EmptyArmError(f"training data for fold {fold} lost an arm")
        models.append(
            FoldNuisances(
                fold=fold,
                g1=fit(g_spec, dataset.z[treated], y[treated]),
                g0=fit(g_spec, dataset.z[control], y[control]),
                m=fit(m_spec, dataset.z[train], t[train].astype(np.float64)),
            )
        )
    return models


def aipw_fold_scores(dataset: RepresentationSet, folds: FoldAssignment,
                     models: list[FoldNuisances], clip_eps: float
                     ) -> tuple[np.ndarray, float]:
    """Evaluate the orthogonalized score on each fold with that fold's
    out-of-fold nuisances; returns (scores, fraction of clipped m-hat)."""
    t, y = dataset.require_ty()
    scores = np.empty(dataset.n)
    clipped = 0
    for nuisance in models:
        idx = folds.indices(nuisance.fold)
        g1_hat = predict(nuisance.g1, dataset.z[idx])
        g0_hat = predict(nuisance.g0, dataset.z[idx])
        m_raw = predict(nuisance.m, dataset.z[idx])
        clipped += int(np.sum((m_raw < clip_eps) | (m_raw > 1.0 - clip_eps)))
        m_hat = np.clip(m_raw, clip_eps, 1.0 - clip_eps)
        scores[idx] = evaluate_score(t[idx].astype(np.float64), y[idx],
                                     g1_hat, g0_hat, m_hat)
    return scores, clipped / dataset.n


def dml_aipw_ate(dataset: RepresentationSet, g_spec, m_spec, k: int = 2,
                 clip_eps: float = CLIP_EPS_DEFAULT, seed: int = 0,
                 level: float = 0.95) -> AteReport:
    """Cross-fitted doubly-robust ATE with arm-specific outcome models.

    Estimate = mean of all per-unit scores; variance = sample variance of
    the scores; the interval uses normal quantiles.
    """
    if not 0.0 < clip_eps < 0.5:
        raise ValidationError("clip_eps must lie in (0, 0.5)")
    t, y = dataset.require_ty()
    n1 = int((t == 1).sum())
    if min(n1, dataset.n - n1) < 2 * k:
        raise EmptyArmError(f"need at least {2 * k} observations per arm")
    folds = make_folds(dataset.n, k, seed)
    models = fit_fold_nuisances(dataset, folds, g_spec, m_spec)
    scores, clip_fraction = aipw_fold_scores(dataset, folds, models, clip_eps)
    estimate = float(scores.mean())
    se = float(scores.std(ddof=1) / np.sqrt(dataset.n))
    warn = []
    if clip_fraction > OVERLAP_WARN_FRACTION:
        message = (f"{clip_fraction:.0%} of estimated propensities were clipped "
                   f"to [{clip_eps}, {1 - clip_eps}]")
        warnings.warn(message, OverlapWarning)
        warn.append("overlap: " + message)
    fold_means = [float(scores[folds.indices(f)].mean()) for f in range(k)]
    return _report("dml_aipw", estimate, se, level, folds=fold_means,
                   n=dataset.n, warn=warn)


# --- DML (partialling-out, partially linear model) ----------------------------


def partialling_out_from_residuals(t_res, y_res) -> tuple[float, float]:
    """Residual-on-residual slope and its sandwich standard error.

    theta = sum(t~ y~) / sum(t~^2);
    se    = sqrt(sum((t~ (y~ - t~ theta))^2)) / sum(t~^2).
    """
    t_res = np.asarray(t_res, dtype=np.float64)
    y_res = np.asarray(y_res, dtype=np.float64)
    denom = float(t_res @ t_res)
    if denom < 1e-10:
        raise DegenerateResidualizationError(
            "treatment residuals are numerically zero"
        )
    theta = float(t_res @ y_res) / denom
    psi = t_res * (y_res - t_res * theta)
    se = float(np.sqrt(psi @ psi)) / denom
    return theta, se


def dml_partialling_out_ate(dataset: RepresentationSet, l_spec, m_spec,
                            k: int = 2, seed: int = 0, level: float = 0.95
                            ) -> AteReport:
    """Robinson-style residual-on-residual DML under the partially linear
    model; folds are combined by pooling residual sums."""
    t, y = dataset.require_ty()
    n1 = int((t == 1).sum())
    if min(n1, dataset.n - n1) < 2 * k:
        raise EmptyArmError(f"need at least {2 * k} observations per arm")
    folds = make_folds(dataset.n, k, seed)
    t_res = np.empty(dataset.n)
    y_res = np.empty(dataset.n)
    fold_thetas = []
    for fold in range(k):
        train, test = folds.complement(fold), folds.indices(fold)
        ell = fit(l_spec, dataset.z[train], y[train])
        m = fit(m_spec, dataset.z[train], t[train].astype(np.float64))
        y_res[test] = y[test] - predict(ell, dataset.z[test])
        t_res[test] = t[test].astype(np.float64) - predict(m, dataset.z[test])
        if float(t_res[test] @ t_res[test]) >= 1e-10:
            fold_thetas.append(
                float(t_res[test] @ y_res[test]) / float(t_res[test] @ t_res[test])
            )
    theta, se = partialling_out_from_residuals(t_res, y_res)
    return _report("dml_partialling_out", theta, se, level, folds=fold_thetas,
                   n=dataset.n)
