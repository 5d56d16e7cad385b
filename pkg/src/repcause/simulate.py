"""Ground-truth data generators and repeated-experiment runners.

Every generator returns ``(RepresentationSet, GroundTruth)`` where the
truth records the true ATE and the per-row nuisance values, so tests can
plug the truth straight into the orthogonalized score.  Generators are
plain picklable classes with a ``generate(seed)`` method; repetition r of
an experiment always uses derived seed ``seed + r``.
"""
from __future__ import annotations

import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np
from scipy import stats

from .data import RepresentationSet
from .errors import (
    InvalidSpecError,
    MissingFieldError,
    PoorEncodingWarning,
    ValidationError,
)
from .estimators import (
    AteReport,
    dml_aipw_ate,
    dml_partialling_out_ate,
    naive_ate,
    oracle_ate,
    s_learner_ate,
)
from .hcm import HcmFunction, HcmSpec, gen_hcm_function
from .learners import AutoencoderSpec, MlpSpec, fit_autoencoder, fit_mlp
from .transforms import sample_orthogonal


def _sigmoid(x):
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


@dataclass(frozen=True)
class GroundTruth:
    """True ATE and per-row nuisance values of a generated dataset."""

    true_ate: float
    m: np.ndarray
    g0: np.ndarray
    g1: np.ndarray
    info: dict = field(default_factory=dict)


@dataclass(frozen=True)
class ConfoundingSpec:
    kind: str = "label"  # label | complex | hcm_product
    true_ate: float = 2.0
    p_treat_high: float = 0.7
    p_treat_low: float = 0.3
    outcome_noise_sd: float = 1.0
    label_coefficient: float = 3.0  # applied with a negative sign
    coefficient_seed: int = 0
    latent_dim: int = 5
    product_gain: float = 40.0
    product_outcome_scale: float = 2.0

    def __post_init__(self):
        if not 0.0 < self.p_treat_low <= self.p_treat_high < 1.0:
            raise InvalidSpecError("need 0 < p_low <= p_high < 1")
        if self.outcome_noise_sd <= 0:
            raise InvalidSpecError("outcome noise sd must be > 0")
        if self.latent_dim < 1:
            raise InvalidSpecError("latent dim must be >= 1")


# --- synthetic manifolds ------------------------------------------------------


class ManifoldSampler:
    """Smooth random embedding of a latent cube into R^d.

    Each ambient coordinate is a random linear functional of the latent
    point plus a few random sinusoids; an optional Haar rotation mixes the
    result.  The binary label is 1{u_1 > 0}.
    """

    def __init__(self, d_ambient: int, d_manifold: int, seed: int,
                 n_sines: int = 3, sine_amplitude: float = 0.3,
                 identity_map: bool = False, rotate: bool = False,
                 ambient_noise_sd: float = 0.0, label_margin: float = 0.0,
                 signal_decay: float = 0.0):
        if d_manifold < 1 or d_ambient < 1:
            raise InvalidSpecError("dimensions must be >= 1")
        if identity_map and d_manifold != d_ambient:
            raise InvalidSpecError("identity map requires d_manifold == d_ambient")
        if d_manifold > d_ambient:
            raise InvalidSpecError("d_manifold must not exceed d_ambient")
        if ambient_noise_sd < 0:
            raise InvalidSpecError("ambient noise sd must be >= 0")
        if not 0.0 <= label_margin < 1.0:
            raise InvalidSpecError("label margin must lie in [0, 1)")
        if signal_decay < 0:
            raise InvalidSpecError("signal decay must be >= 0")
        self.d_ambient = d_ambient
        self.d_manifold = d_manifold
        self.seed = seed
        self.identity_map = identity_map
        self.ambient_noise_sd = ambient_noise_sd
        self.label_margin = label_margin
        rng = np.random.default_rng(seed)
        # decaying per-coordinate signal scale mimics the eigen-spectrum of
        # real representation exports; tail coordinates are mostly noise
        scale = (1.0 + np.arange(d_ambient)) ** (-signal_decay)
        self.linear = rng.standard_normal((d_ambient, d_manifold)) * scale[:, None]
        self.amps = rng.normal(0.0, sine_amplitude,
                               size=(d_ambient, n_sines)) * scale[:, None]
        self.freqs = rng.standard_normal((d_ambient, n_sines, d_manifold))
        self.phases = rng.uniform(0.0, 2.0 * np.pi, size=(d_ambient, n_sines))
        self.rotation = (
            sample_orthogonal(d_ambient, seed + 1_000_003).q if rotate else None
        )

    def embed(self, u: np.ndarray) -> np.ndarray:
        if self.identity_map:
            z = u.copy()
        else:
            z = u @ self.linear.T
            angles = np.einsum("nm,dsm->nds", u, self.freqs) + self.phases
            z += (np.sin(angles) * self.amps).sum(axis=2)
        if self.rotation is not None:
            z = z @ self.rotation.T
        return z

    def sample_with_rng(self, n: int, rng) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        u = rng.uniform(-1.0, 1.0, size=(n, self.d_manifold))
        if self.label_margin > 0:
            # bimodal first coordinate: classes form separated clusters the
            # way classifier representations do
            gap = self.label_margin
            u[:, 0] = np.sign(u[:, 0]) * (gap + (1.0 - gap) * np.abs(u[:, 0]))
        labels = (u[:, 0] > 0.0).astype(np.uint8)
        z = self.embed(u)
        if self.ambient_noise_sd > 0:
            # "close to" the manifold: jitter keeps the feature covariance
            # well conditioned the way real embedding exports are
            z = z + rng.normal(0.0, self.ambient_noise_sd, size=z.shape)
        return u, z, labels

    def sample(self, n: int, seed) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Returns (latent u, ambient z, labels)."""
        return self.sample_with_rng(n, np.random.default_rng(seed))


def gen_synthetic_manifold(n: int, d_ambient: int, d_manifold: int,
                           smooth_map_seed: int, rotate: bool = False,
                           identity_map: bool = False,
                           sine_amplitude: float = 0.3,
                           ambient_noise_sd: float = 0.0,
                           point_seed: int | None = None
                           ) -> tuple[np.ndarray, np.ndarray]:
    """One draw of n points on a random smooth d_manifold-dimensional
    manifold embedded in R^d_ambient, plus binary labels."""
    sampler = ManifoldSampler(d_ambient, d_manifold, smooth_map_seed,
                              sine_amplitude=sine_amplitude,
                              identity_map=identity_map, rotate=rotate,
                              ambient_noise_sd=ambient_noise_sd)
    _, z, labels = sampler.sample(
        n, smooth_map_seed + 1 if point_seed is None else point_seed
    )
    return z, labels


# --- label confounding --------------------------------------------------------


def _label_confound(z, labels, spec: ConfoundingSpec, rng
                    ) -> tuple[RepresentationSet, GroundTruth]:
    labels = np.asarray(labels, dtype=np.float64)
    m = np.where(labels == 1.0, spec.p_treat_high, spec.p_treat_low)
    t = (rng.random(len(labels)) < m).astype(np.uint8)
    g0 = -spec.label_coefficient * labels
    g1 = spec.true_ate + g0
    y = g0 + spec.true_ate * t + rng.normal(0.0, spec.outcome_noise_sd,
                                            size=len(labels))
    dataset = RepresentationSet(z=z, t=t, y=y, label=labels.astype(np.uint8))
    truth = GroundTruth(
        true_ate=spec.true_ate, m=m, g0=g0, g1=g1,
        info={"label_coefficient": -spec.label_coefficient},
    )
    return dataset, truth


def gen_label_confounding(n: int, z_source, spec: ConfoundingSpec, seed: int
                          ) -> tuple[RepresentationSet, GroundTruth]:
    """Treatment and outcome both driven by the source's binary label:
    P(T=1) is p_high when the label is 1 and p_low otherwise, and the
    outcome carries a negative label term (negative naive bias)."""
    if isinstance(z_source, RepresentationSet):
        if z_source.label is None:
            raise MissingFieldError("label confounding needs labels")
        z, labels = z_source.z, z_source.label
    else:
        z, labels = z_source
        z = np.asarray(z, dtype=np.float64)
        labels = np.asarray(labels)
    if len(labels) < n:
        raise ValidationError(f"source has {len(labels)} rows, need {n}")
    rng = np.random.default_rng(seed)
    if len(labels) > n:
        keep = rng.choice(len(labels), size=n, replace=False)
        z, labels = z[keep], labels[keep]
    return _label_confound(z, labels, spec, rng)


class ManifoldLabelGenerator:
    """Fresh manifold points plus label confounding per repetition; the
    embedding map stays fixed across repetitions."""

    def __init__(self, n: int, sampler: ManifoldSampler,
                 spec: ConfoundingSpec | None = None):
        self.n = n
        self.sampler = sampler
        self.spec = spec or ConfoundingSpec(kind="label")

    def generate(self, seed: int) -> tuple[RepresentationSet, GroundTruth]:
        rng = np.random.default_rng(seed)
        _, z, labels = self.sampler.sample_with_rng(self.n, rng)
        return _label_confound(z, labels, self.spec, rng)


# --- sparse linear confounding (raw-coordinate sparsity) -----------------------


class SparseLinearConfounder:
    """Nuisances exactly linear/logistic-linear in z and sparse in the raw
    coordinates; an optional fixed rotation re-expresses the features so
    the same truth becomes dense.

    Designed so unpenalized linear nuisances are correctly specified while
    sparsity-seeking learners face a dense rotated truth.
    """

    def __init__(self, n: int, d: int, support: int = 3,
                 spec: ConfoundingSpec | None = None,
                 rotation_seed: int | None = None,
                 propensity_scale: float = 0.5, outcome_scale: float = 0.35):
        if support < 1 or support > d:
            raise InvalidSpecError("support must lie in [1, d]")
        self.n, self.d = n, d
        self.spec = spec or ConfoundingSpec(kind="label")
        rng = np.random.default_rng(self.spec.coefficient_seed)
        idx = rng.choice(d, size=support, replace=False)
        theta = np.zeros(d)
        theta[idx] = rng.choice((-1.0, 1.0), size=support) * rng.uniform(
            0.8, 1.2, size=support
        )
        self.theta = theta * propensity_scale / np.sqrt(support)
        beta = np.zeros(d)
        # outcome coefficients oppose the propensity direction coordinate by
        # coordinate, so unadjusted estimation is reliably biased downward
        beta[idx] = -np.sign(theta[idx]) * rng.uniform(0.8, 1.2, size=support)
        self.beta = beta * outcome_scale / np.sqrt(support)
        self.rotation = (
            None if rotation_seed is None else sample_orthogonal(d, rotation_seed).q
        )

    def generate(self, seed: int) -> tuple[RepresentationSet, GroundTruth]:
        rng = np.random.default_rng(seed)
        spec = self.spec
        z = rng.standard_normal((self.n, self.d))
        m = _sigmoid(z @ self.theta)
        t = (rng.random(self.n) < m).astype(np.uint8)
        g0 = z @ self.beta
        g1 = spec.true_ate + g0
        y = g0 + spec.true_ate * t + rng.normal(0.0, spec.outcome_noise_sd, self.n)
        z_out = z if self.rotation is None else z @ self.rotation.T
        dataset = RepresentationSet(z=z_out, t=t, y=y)
        return dataset, GroundTruth(spec.true_ate, m, g0, g1,
                                    info={"theta": self.theta, "beta": self.beta})


def gen_sparse_linear_outcome(n: int, d: int, support: int = 3, seed: int = 0,
                              noise_sd: float = 0.1, coefficient: float = 2.0
                              ) -> RepresentationSet:
    """Plain sparse regression data (no treatment) for the rotation curve."""
    rng = np.random.default_rng(seed)
    z = rng.standard_normal((n, d))
    idx = rng.choice(d, size=support, replace=False)
    beta = np.zeros(d)
    beta[idx] = coefficient * rng.choice((-1.0, 1.0), size=support)
    y = z @ beta + rng.normal(0.0, noise_sd, size=n)
    return RepresentationSet(z=z, y=y)


# --- complex confounding (autoencoder encodings) --------------------------------


class ComplexConfounder:
    """Confounding through a low-dimensional autoencoder encoding of the
    representations: propensity is logistic in the standardized encodings
    with Gaussian coefficients, and the outcome carries the encodings with
    coefficients restricted to be negative."""

    def __init__(self, reps, spec: ConfoundingSpec | None = None,
                 ae_spec: AutoencoderSpec | None = None, b_override=None,
                 propensity_scale: float = 1.0, outcome_scale: float = 1.0):
        reps = np.asarray(reps, dtype=np.float64)
        self.spec = spec or ConfoundingSpec(kind="complex")
        self.ae = fit_autoencoder(reps, self.spec.latent_dim,
                                  ae_spec or AutoencoderSpec())
        recon = self.ae.predict(reps)
        total_var = float(reps.var(axis=0).mean())
        self.reconstruction_fraction = float(
            np.mean((recon - reps) ** 2) / max(total_var, 1e-12)
        )
        if self.reconstruction_fraction > 0.5:
            warnings.warn(
                f"autoencoder reconstructs only "
                f"{1 - self.reconstruction_fraction:.0%} of the variance",
                PoorEncodingWarning,
            )
        e = self.ae.encode(reps)
        mean, sd = e.mean(axis=0), e.std(axis=0)
        sd = np.where(sd > 0, sd, 1.0)
        self.encodings = (e - mean) / sd
        rng = np.random.default_rng(self.spec.coefficient_seed)
        self.a = rng.standard_normal(self.spec.latent_dim) * propensity_scale
        drawn_b = -np.abs(rng.standard_normal(self.spec.latent_dim)) * outcome_scale
        self.b = drawn_b if b_override is None else np.asarray(b_override, float)
        self.reps = reps
        self.m = _sigmoid(self.encodings @ self.a)
        self.g0 = self.encodings @ self.b
        self.g1 = self.spec.true_ate + self.g0

    def generate(self, seed: int) -> tuple[RepresentationSet, GroundTruth]:
        rng = np.random.default_rng(seed)
        spec = self.spec
        n = self.reps.shape[0]
        t = (rng.random(n) < self.m).astype(np.uint8)
        y = self.g0 + spec.true_ate * t + rng.normal(0.0, spec.outcome_noise_sd, n)
        dataset = RepresentationSet(z=self.reps, t=t, y=y)
        truth = GroundTruth(
            spec.true_ate, self.m, self.g0, self.g1,
            info={
                "propensity_coefficients": self.a,
                "outcome_coefficients": self.b,
                "reconstruction_fraction": self.reconstruction_fraction,
            },
        )
        return dataset, truth


def gen_complex_confounding(reps, spec: ConfoundingSpec, seed: int,
                            ae_spec: AutoencoderSpec | None = None
                            ) -> tuple[RepresentationSet, GroundTruth]:
    return ComplexConfounder(reps, spec, ae_spec=ae_spec).generate(seed)


# --- product-of-all-features confounding ---------------------------------------


class ProductConfounder:
    """Nuisances driven by s(z) = prod_j tanh(gain * z_j): bounded in
    [-1, 1] by construction, so propensities 0.5 + 0.45 s stay inside
    (0.05, 0.95), yet the signal depends on every feature at once and no
    implemented estimator adapts to it."""

    def __init__(self, reps, spec: ConfoundingSpec | None = None):
        reps = np.asarray(reps, dtype=np.float64)
        if reps.shape[1] < 1:
            raise InvalidSpecError("need at least one feature")
        self.spec = spec or ConfoundingSpec(kind="hcm_product")
        self.reps = reps
        self.s = np.prod(np.tanh(self.spec.product_gain * reps), axis=1)
        self.m = 0.5 + 0.45 * self.s
        self.g0 = -self.spec.product_outcome_scale * self.s
        self.g1 = self.spec.true_ate + self.g0

    def generate(self, seed: int) -> tuple[RepresentationSet, GroundTruth]:
        rng = np.random.default_rng(seed)
        spec = self.spec
        n = self.reps.shape[0]
        t = (rng.random(n) < self.m).astype(np.uint8)
        y = self.g0 + spec.true_ate * t + rng.normal(0.0, spec.outcome_noise_sd, n)
        dataset = RepresentationSet(z=self.reps, t=t, y=y)
        truth = GroundTruth(spec.true_ate, self.m, self.g0, self.g1,
                            info={"product_gain": spec.product_gain})
        return dataset, truth


def gen_hcm_product_confounding(reps, seed: int,
                                spec: ConfoundingSpec | None = None
                                ) -> tuple[RepresentationSet, GroundTruth]:
    return ProductConfounder(reps, spec).generate(seed)


# --- experiment runners ---------------------------------------------------------


@dataclass(frozen=True)
class EstimatorConfig:
    """How to run one estimator inside an experiment."""

    name: str
    method: str  # naive | oracle | s_learner | dml_aipw | dml_plo
    g: object | None = None
    m: object | None = None
    k: int = 2
    clip_eps: float = 0.01
    level: float = 0.95


def run_estimator(config: EstimatorConfig, dataset: RepresentationSet,
                  seed: int = 0) -> AteReport:
    method = config.method
    if method == "naive":
        t, y = dataset.require_ty()
        return naive_ate(t, y, level=config.level)
    if method == "oracle":
        t, y = dataset.require_ty()
        if dataset.label is None:
            raise MissingFieldError("oracle estimator needs labels")
        return oracle_ate(t, y, dataset.label, level=config.level)
    if method == "s_learner":
        return s_learner_ate(dataset, config.g, level=config.level)
    if method == "dml_aipw":
        return dml_aipw_ate(dataset, config.g, config.m, k=config.k,
                            clip_eps=config.clip_eps, seed=seed,
                            level=config.level)
    if method == "dml_plo":
        return dml_partialling_out_ate(dataset, config.g, config.m,
                                       k=config.k, seed=seed, level=config.level)
    raise InvalidSpecError(f"unknown estimator method {method!r}")


@dataclass(frozen=True)
class CoverageRow:
    rep: int
    estimator: str
    estimate: float
    std_error: float
    ci_low: float
    ci_high: float
    covered: bool


@dataclass(frozen=True)
class CoverageSummary:
    estimator: str
    mean_bias: float
    coverage: float
    mean_ci_width: float
    n_reps: int


def _generate(generator, seed: int):
    if hasattr(generator, "generate"):
        return generator.generate(seed)
    return generator(seed)


def _coverage_rep(args) -> list[CoverageRow]:
    generator, configs, seed, rep = args
    dataset, truth = _generate(generator, seed + rep)
    rows = []
    for config in configs:
        report = run_estimator(config, dataset, seed=seed + rep)
        rows.append(CoverageRow(
            rep=rep,
            estimator=config.name,
            estimate=report.estimate,
            std_error=report.std_error,
            ci_low=report.ci_low,
            ci_high=report.ci_high,
            covered=bool(report.ci_low <= truth.true_ate <= report.ci_high),
        ))
    return rows


def run_coverage_experiment(generator, estimator_configs, reps: int, seed: int,
                            threads: int = 1
                            ) -> tuple[list[CoverageRow], dict[str, CoverageSummary]]:
    """Repeat generate-and-estimate ``reps`` times (seed + r per repetition)
    and summarize bias, 95% CI coverage and CI width per estimator."""
    if reps < 2:
        raise ValidationError("need at least 2 repetitions")
    configs = list(estimator_configs)
    tasks = [(generator, configs, seed, r) for r in range(reps)]
    if threads > 1:
        with ProcessPoolExecutor(max_workers=threads) as pool:
            per_rep = list(pool.map(_coverage_rep, tasks, chunksize=1))
    else:
        per_rep = [_coverage_rep(task) for task in tasks]
    rows = [row for batch in per_rep for row in batch]

    true_ate = _generate(generator, seed)[1].true_ate
    summaries = {}
    for config in configs:
        mine = [r for r in rows if r.estimator == config.name]
        estimates = np.array([r.estimate for r in mine])
        widths = np.array([r.ci_high - r.ci_low for r in mine])
        summaries[config.name] = CoverageSummary(
            estimator=config.name,
            mean_bias=float(estimates.mean() - true_ate),
            coverage=float(np.mean([r.covered for r in mine])),
            mean_ci_width=float(widths.mean()),
            n_reps=len(mine),
        )
    return rows, summaries


def ks_vs_standard_normal(sample) -> tuple[float, float]:
    """Kolmogorov-Smirnov distance and p-value against N(0, 1)."""
    result = stats.kstest(np.asarray(sample, dtype=np.float64), "norm")
    return float(result.statistic), float(result.pvalue)


@dataclass(frozen=True)
class NormalityResult:
    standardized: np.ndarray
    ks_stat: float
    ks_pvalue: float


def run_normality_experiment(generator, estimator_config: EstimatorConfig,
                             reps: int = 200, seed: int = 0) -> NormalityResult:
    """Standardize (estimate - true ATE) / std_error over repetitions and
    test the sample against the standard normal."""
    if reps < 50:
        raise ValidationError("need at least 50 repetitions")
    standardized = np.empty(reps)
    for r in range(reps):
        dataset, truth = _generate(generator, seed + r)
        report = run_estimator(estimator_config, dataset, seed=seed + r)
        standardized[r] = (report.estimate - truth.true_ate) / report.std_error
    ks_stat, ks_pvalue = ks_vs_standard_normal(standardized)
    return NormalityResult(standardized, ks_stat, ks_pvalue)


@dataclass(frozen=True)
class RateRow:
    d_ambient: int
    n_train: int
    test_mse: float


def run_rate_experiment(hcm_spec: HcmSpec, d_manifold: int, ambient_dims,
                        n_grid, mlp_spec: MlpSpec, seed: int,
                        n_test: int = 10_000, noise_sd: float = 0.0,
                        sine_amplitude: float = 0.3
                        ) -> tuple[list[RateRow], dict[int, float]]:
    """Held-out MSE of an MLP trained on ambient features against an HCM
    target of the latent coordinates, across ambient dimensions and sample
    sizes; returns the table plus per-dimension log-log slopes."""
    n_grid = list(n_grid)
    if sorted(n_grid) != n_grid:
        raise ValidationError("n_grid must be ascending")
    target: HcmFunction = gen_hcm_function(hcm_spec, seed)
    if target.input_dim > d_manifold:
        raise InvalidSpecError("HCM leaves must index latent coordinates")
    rows = []
    slopes = {}
    for d in ambient_dims:
        sampler = ManifoldSampler(d, d_manifold, seed=seed + d,
                                  sine_amplitude=sine_amplitude)
        u_test, z_test, _ = sampler.sample(n_test, [seed, d, 999_983])
        f_test = target.evaluate(u_test[:, : target.input_dim])
        for n in n_grid:
            rng = np.random.default_rng([seed, d, n])
            u_tr, z_tr, _ = sampler.sample(n, [seed, d, n, 1])
            y_tr = target.evaluate(u_tr[:, : target.input_dim])
            if noise_sd > 0:
                y_tr = y_tr + rng.normal(0.0, noise_sd, size=n)
            model = fit_mlp(z_tr, y_tr, replace(mlp_spec, seed=seed + d + n))
            mse = float(np.mean((model.predict(z_test) - f_test) ** 2))
            rows.append(RateRow(d_ambient=d, n_train=n, test_mse=mse))
        mses = np.array([r.test_mse for r in rows if r.d_ambient == d])
        logs = np.log(np.maximum(mses, 1e-300))
        slope = np.polyfit(np.log(np.asarray(n_grid, float)), logs, 1)[0]
        slopes[d] = float(slope)
    return rows, slopes
