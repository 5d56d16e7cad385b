"""Linear nuisance learners: OLS, coordinate-descent lasso, IRLS logistic
regression and L1-penalized logistic regression via proximal gradient.

Lasso and L1-logistic standardize features internally (mean 0, sd 1) and
report coefficients on the original scale; OLS and L2-logistic operate on
raw features, which is what makes their fits invariant under invertible
linear feature maps.
"""
from __future__ import annotations

import numpy as np

from ..data import make_folds
from ..errors import InvalidSpecError, NumericsError
from .base import Diagnostics, FittedLearner, as_xy, check_finite
from .specs import (
    LassoSpec,
    LogisticL1Spec,
    LogisticSpec,
    MeanSpec,
    OlsSpec,
    default_penalty_grid,
)

MAX_SWEEPS = 10_000
COEF_TOL = 1e-8
IRLS_MAX_ITER = 100
IRLS_GRAD_TOL = 1e-8
DIVERGENCE_NORM = 1e6
PROX_MAX_ITER = 4_000
PROX_TOL = 1e-7


def _sigmoid(eta: np.ndarray) -> np.ndarray:
    out = np.empty_like(eta)
    pos = eta >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-eta[pos]))
    ex = np.exp(eta[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


def _softplus(eta: np.ndarray) -> np.ndarray:
    return np.logaddexp(0.0, eta)


class LinearModel(FittedLearner):
    """Intercept + coefficient vector; used by every linear learner."""

    def __init__(self, spec, intercept, coef, diagnostics, link="identity"):
        super().__init__(spec, len(coef), diagnostics)
        self.intercept = float(intercept)
        self.coef = np.asarray(coef, dtype=np.float64)
        self.link = link

    def _predict(self, x):
        eta = self.intercept + x @ self.coef
        if self.link == "logit":
            return _sigmoid(eta)
        return eta


class ConstantModel(FittedLearner):
    def __init__(self, spec, value, n_features):
        super().__init__(spec, n_features, Diagnostics(0.0, 0, True))
        self.value = float(value)

    def _predict(self, x):
        return np.full(x.shape[0], self.value)


def fit_mean(x, target, spec: MeanSpec | None = None) -> ConstantModel:
    spec = spec or MeanSpec()
    x, target = as_xy(x, target)
    value = spec.value if spec.value is not None else float(np.mean(target))
    return ConstantModel(spec, value, x.shape[1])


# --- ordinary least squares -------------------------------------------------


def fit_ols(x, y, spec: OlsSpec | None = None) -> LinearModel:
    """Least squares with intercept, solved via QR; near-singular designs
    fall back to a tiny ridge (1e-10) on the normal equations."""
    spec = spec or OlsSpec()
    x, y = as_xy(x, y)
    n, d = x.shape
    a = np.column_stack([np.ones(n), x])
    q, r = np.linalg.qr(a)
    diag = np.abs(np.diag(r))
    rank_ok = diag.min() > 1e-10 * max(diag.max(), 1.0) and a.shape[0] >= a.shape[1]
    if rank_ok:
        beta = np.linalg.solve(r, q.T @ y)
    else:
        gram = a.T @ a + 1e-10 * np.eye(d + 1)
        beta = np.linalg.solve(gram, a.T @ y)
    resid = y - a @ beta
    diagnostics = Diagnostics(float(np.mean(resid**2)), 1, True)
    return LinearModel(spec, beta[0], beta[1:], diagnostics)


# --- lasso -------------------------------------------------------------------


def _standardize(x):
    mean = x.mean(axis=0)
    sd = x.std(axis=0)
    active = sd > 0
    xs = np.zeros_like(x)
    xs[:, active] = (x[:, active] - mean[active]) / sd[active]
    return xs, mean, sd, active


def lasso_lambda_max(x, y) -> float:
    """Smallest penalty with an all-zero slope solution (standardized scale)."""
    xs, _, _, _ = _standardize(np.asarray(x, dtype=np.float64))
    yc = np.asarray(y, dtype=np.float64)
    yc = yc - yc.mean()
    return float(np.max(np.abs(xs.T @ yc)) / len(yc)) if x.shape[1] else 0.0


def _cd_sweep(beta, g_beta, gram, corr, lam, js):
    """One pass of cyclic coordinate descent over columns ``js``.

    Minimizes (1/2n)||yc - Xs beta||^2 + lam ||beta||_1 using the Gram
    matrix ``gram = Xs'Xs/n`` and ``corr = Xs'yc/n``; ``g_beta`` caches
    gram @ beta and is updated in place.
    """
    max_delta = 0.0
    for j in js:
        old = beta[j]
        rho = corr[j] - g_beta[j] + gram[j, j] * old
        new = 0.0
        if rho > lam:
            new = (rho - lam) / gram[j, j]
        elif rho < -lam:
            new = (rho + lam) / gram[j, j]
        if new != old:
            delta = new - old
            beta[j] = new
            g_beta += gram[:, j] * delta
            if abs(delta) > max_delta:
                max_delta = abs(delta)
    return max_delta


def _cd_solve(gram, corr, lam, beta, g_beta):
    """Coordinate descent to max coefficient change < COEF_TOL, cycling the
    active set between full sweeps."""
    d = len(corr)
    all_js = range(d)
    sweeps = 0
    while sweeps < MAX_SWEEPS:
        delta = _cd_sweep(beta, g_beta, gram, corr, lam, all_js)
        sweeps += 1
        if delta < COEF_TOL:
            return sweeps, True
        active = np.nonzero(beta)[0]
        while sweeps < MAX_SWEEPS and len(active):
            delta = _cd_sweep(beta, g_beta, gram, corr, lam, active)
            sweeps += 1
            if delta < COEF_TOL:
                break
    return sweeps, sweeps < MAX_SWEEPS


def _lasso_path(xs, yc, lams):
    """Warm-started solutions along a descending penalty path."""
    n, d = xs.shape
    gram = xs.T @ xs / n
    corr = xs.T @ yc / n
    beta = np.zeros(d)
    g_beta = np.zeros(d)
    out = np.empty((len(lams), d))
    iters = 0
    converged = True
    order = np.argsort(lams)[::-1]
    for pos in order:
        it, ok = _cd_solve(gram, corr, float(lams[pos]), beta, g_beta)
        iters += it
        converged = converged and ok
        out[pos] = beta
    return out, iters, converged


def fit_lasso(x, y, lam: float | None = None, cv_grid=None, seed: int = 0,
              cv_points: int = 50, cv_floor: float = 1e-4,
              spec: LassoSpec | None = None) -> LinearModel:
    """Cyclic coordinate descent lasso; with no fixed ``lam``, the penalty is
    chosen by 5-fold CV MSE over ``cv_grid``."""
    if spec is not None:
        lam, cv_grid, seed = spec.lam, spec.cv_grid, spec.seed
    else:
        spec = LassoSpec(lam=lam, cv_grid=None if cv_grid is None else tuple(cv_grid),
                         cv_points=cv_points, cv_floor=cv_floor, seed=seed)
    x, y = as_xy(x, y)
    n, d = x.shape
    if n < 2:
        raise InvalidSpecError("lasso needs at least 2 rows")

    if lam is None:
        grid = np.asarray(
            spec.cv_grid
            if spec.cv_grid is not None
            else default_penalty_grid(lasso_lambda_max(x, y),
                                      n_points=spec.cv_points,
                                      floor=spec.cv_floor),
            dtype=np.float64,
        )
        if grid.size == 0:
            raise InvalidSpecError("empty lasso cv grid")
        folds = make_folds(n, min(5, n), seed)
        cv_sse = np.zeros(len(grid))
        for fold in range(folds.k):
            tr, te = folds.complement(fold), folds.indices(fold)
            xs, mean, sd, active = _standardize(x[tr])
            yc = y[tr] - y[tr].mean()
            betas, _, _ = _lasso_path(xs, yc, grid)
            coefs = np.zeros_like(betas)
            coefs[:, active] = betas[:, active] / sd[active]
            intercepts = y[tr].mean() - coefs @ mean
            preds = x[te] @ coefs.T + intercepts
            cv_sse += ((preds - y[te][:, None]) ** 2).sum(axis=0)
        lam = float(grid[int(np.argmin(cv_sse))])

    xs, mean, sd, active = _standardize(x)
    y_mean = y.mean()
    yc = y - y_mean
    betas, iters, converged = _lasso_path(xs, yc, np.array([lam]))
    beta_std = betas[0]
    coef = np.zeros(d)
    coef[active] = beta_std[active] / sd[active]
    intercept = y_mean - coef @ mean
    resid = yc - xs @ beta_std
    loss = float(0.5 * np.mean(resid**2) + lam * np.abs(beta_std).sum())
    model = LinearModel(spec, intercept, coef, Diagnostics(loss, iters, converged))
    model.lam = float(lam)
    model.beta_standardized = beta_std
    model.feature_means = mean
    model.feature_sds = sd
    return model


# --- logistic regression (IRLS, L2) ------------------------------------------


def _logistic_objective(a, t, beta, lam):
    eta = a @ beta
    return float(np.sum(_softplus(eta) - t * eta) + 0.5 * lam * beta @ beta)


def fit_logistic(x, t, l2_lambda: float = 0.0,
                 spec: LogisticSpec | None = None) -> LinearModel:
    """Newton/IRLS with step-halving on the L2-penalized log-likelihood.

    The penalty applies to all coefficients including the intercept, so a
    one-class sample still has a bounded optimum for any lam > 0.  With
    lam = 0 and separable data, the fit stops once ||beta|| exceeds 1e6 and
    is flagged non-converged.
    """
    if spec is not None:
        l2_lambda = spec.lam
    else:
        spec = LogisticSpec(lam=l2_lambda)
    x, t = as_xy(x, t)
    n, d = x.shape
    if n < 2:
        raise InvalidSpecError("logistic regression needs at least 2 rows")
    a = np.column_stack([np.ones(n), x])
    lam = float(l2_lambda)
    beta = np.zeros(d + 1)
    obj = _logistic_objective(a, t, beta, lam)
    converged = False
    it = 0
    for it in range(1, IRLS_MAX_ITER + 1):
        p = _sigmoid(a @ beta)
        grad = a.T @ (p - t) + lam * beta
        if np.max(np.abs(grad)) < IRLS_GRAD_TOL:
            converged = True
            break
        w = np.maximum(p * (1.0 - p), 1e-12)
        hess = (a * w[:, None]).T @ a + lam * np.eye(d + 1)
        try:
            step = np.linalg.solve(hess, grad)
        except np.linalg.LinAlgError:
            step = np.linalg.lstsq(hess, grad, rcond=None)[0]
        scale = 1.0
        for _ in range(40):
            cand = beta - scale * step
            cand_obj = _logistic_objective(a, t, cand, lam)
            if cand_obj <= obj:
                break
            scale *= 0.5
        beta = beta - scale * step
        obj = _logistic_objective(a, t, beta, lam)
        if not np.isfinite(obj):
            raise NumericsError("logistic objective became non-finite")
        if np.linalg.norm(beta) > DIVERGENCE_NORM:
            break  # perfect separation with lam = 0
    if lam == 0.0 and obj < 1e-6:
        converged = False  # separable data: the MLE sits at infinity
    return LinearModel(spec, beta[0], beta[1:],
                       Diagnostics(obj, it, converged), link="logit")


# --- L1 logistic (proximal gradient) -----------------------------------------


def logistic_lambda_max(x, t) -> float:
    xs, _, _, _ = _standardize(np.asarray(x, dtype=np.float64))
    t = np.asarray(t, dtype=np.float64)
    return float(np.max(np.abs(xs.T @ (t - t.mean()))) / len(t))


def _prox_logistic(a, t, lam, beta0, intercept0, step0):
    """ISTA on mean logistic loss + lam * ||slopes||_1, backtracking step.

    ``a`` is the design with intercept column; ``step0`` an initial step
    from the Lipschitz bound of the smooth part (computed once per path).
    """
    n = a.shape[0]
    beta = np.concatenate([[intercept0], beta0])
    step = step0

    def smooth(b):
        eta = a @ b
        return float(np.mean(_softplus(eta) - t * eta))

    f = smooth(beta)
    it = 0
    converged = False
    for it in range(1, PROX_MAX_ITER + 1):
        p = _sigmoid(a @ beta)
        grad = a.T @ (p - t) / n
        while True:
            cand = beta - step * grad
            cand[1:] = np.sign(cand[1:]) * np.maximum(np.abs(cand[1:]) - step * lam, 0.0)
            diff = cand - beta
            f_cand = smooth(cand)
            if f_cand <= f + grad @ diff + 0.5 / step * diff @ diff + 1e-15:
                break
            step *= 0.5
        delta = np.max(np.abs(diff))
        beta = cand
        f = f_cand
        if not np.isfinite(f):
            raise NumericsError("L1 logistic objective became non-finite")
        if delta < PROX_TOL:
            converged = True
            break
        if np.linalg.norm(beta) > DIVERGENCE_NORM:
            break
        step *= 1.2  # try growing back after successful steps
    return beta[1:], beta[0], f + lam * np.abs(beta[1:]).sum(), it, converged


def fit_logistic_l1(x, t, lam: float | None = None, cv_grid=None, seed: int = 0,
                    cv_points: int = 50, cv_floor: float = 1e-4,
                    spec: LogisticL1Spec | None = None) -> LinearModel:
    """L1-penalized logistic regression; CV selects the penalty by held-out
    log-loss when ``lam`` is not fixed."""
    if spec is not None:
        lam, cv_grid, seed = spec.lam, spec.cv_grid, spec.seed
    else:
        spec = LogisticL1Spec(lam=lam, cv_grid=None if cv_grid is None else tuple(cv_grid),
                              cv_points=cv_points, cv_floor=cv_floor, seed=seed)
    x, t = as_xy(x, t)
    n, d = x.shape
    if n < 2:
        raise InvalidSpecError("logistic regression needs at least 2 rows")

    def path_fit(x_tr, t_tr, lams):
        xs, mean, sd, active = _standardize(x_tr)
        a = np.column_stack([np.ones(len(t_tr)), xs])
        # Lipschitz bound of the mean logistic gradient: ||A||_2^2 / (4n)
        col_norm = np.linalg.norm(a, ord=2)
        step0 = 4.0 * len(t_tr) / max(col_norm**2, 1e-12)
        out = []
        beta = np.zeros(d)
        icpt = float(np.log(t_tr.mean() / (1 - t_tr.mean()))) if 0 < t_tr.mean() < 1 else 0.0
        total_it = 0
        all_ok = True
        for lamk in lams:
            beta, icpt, obj, it, ok = _prox_logistic(a, t_tr, float(lamk), beta,
                                                     icpt, step0)
            total_it += it
            all_ok = all_ok and ok
            coef = np.zeros(d)
            coef[active] = beta[active] / sd[active]
            out.append((coef, icpt - coef @ mean, obj))
        return out, total_it, all_ok

    if lam is None:
        grid = np.asarray(
            spec.cv_grid
            if spec.cv_grid is not None
            else default_penalty_grid(logistic_lambda_max(x, t),
                                      n_points=spec.cv_points,
                                      floor=spec.cv_floor),
            dtype=np.float64,
        )
        if grid.size == 0:
            raise InvalidSpecError("empty logistic L1 cv grid")
        order = np.argsort(grid)[::-1]
        folds = make_folds(n, min(5, n), seed)
        cv_loss = np.zeros(len(grid))
        for fold in range(folds.k):
            tr, te = folds.complement(fold), folds.indices(fold)
            fits, _, _ = path_fit(x[tr], t[tr], grid[order])
            for rank, (coef, icpt, _) in enumerate(fits):
                eta = x[te] @ coef + icpt
                cv_loss[order[rank]] += float(
                    np.sum(_softplus(eta) - t[te] * eta)
                )
        lam = float(grid[int(np.argmin(cv_loss))])

    fits, iters, converged = path_fit(x, t, [lam])
    coef, intercept, obj = fits[0]
    model = LinearModel(spec, intercept, coef,
                        Diagnostics(obj, iters, converged), link="logit")
    model.lam = float(lam)
    return model
