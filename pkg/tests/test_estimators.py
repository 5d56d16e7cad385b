import numpy as np
import pytest

from repcause.data import RepresentationSet, make_folds
from repcause.errors import (
    CollinearityError,
    DegenerateResidualizationError,
    EmptyArmError,
    OverlapWarning,
    ValidationError,
)
from repcause.estimators import (
    aipw_fold_scores,
    dml_aipw_ate,
    dml_partialling_out_ate,
    evaluate_score,
    fit_fold_nuisances,
    naive_ate,
    oracle_ate,
    partialling_out_from_residuals,
    s_learner_ate,
)
from repcause.learners import LogisticSpec, MeanSpec, OlsSpec


def linear_confounded_set(seed, n=400, d=4, ate=2.0):
    rng = np.random.default_rng(seed)
    z = rng.standard_normal((n, d))
    logits = z[:, 0] - 0.5 * z[:, 1]
    m = 1.0 / (1.0 + np.exp(-logits))
    t = (rng.random(n) < m).astype(np.uint8)
    beta = np.zeros(d)
    beta[: min(d, 3)] = [1.5, -1.0, 0.5][: min(d, 3)]
    y = ate * t + z @ beta + rng.standard_normal(n)
    return RepresentationSet(z=z, t=t, y=y), m


# --- naive -------------------------------------------------------------------


def test_naive_unit_effect_degenerate():
    t = np.array([0, 1, 0, 1])
    y = t.astype(float)
    report = naive_ate(t, y)
    assert report.estimate == 1.0
    assert report.std_error == 0.0
    assert "degenerate_zero_variance" in report.warnings
    assert report.ci_low <= report.estimate <= report.ci_high


def test_naive_hand_arithmetic():
    report = naive_ate([0, 0, 1, 1], [0.0, 2.0, 3.0, 5.0])
    assert report.estimate == pytest.approx(3.0)  # (3+5)/2 - (0+2)/2
    # Welch SE: sqrt(var1/2 + var0/2) with ddof 1 -> sqrt(2/2 + 2/2)
    assert report.std_error == pytest.approx(np.sqrt(2.0))


def test_naive_no_effect_large_sample():
    rng = np.random.default_rng(0)
    t = rng.integers(0, 2, 10_000)
    y = rng.standard_normal(10_000)
    report = naive_ate(t, y)
    assert abs(report.estimate) < 3 * report.std_error


def test_naive_empty_arm():
    with pytest.raises(EmptyArmError):
        naive_ate([1, 1, 1], [1.0, 2.0, 3.0])


# --- oracle ------------------------------------------------------------------


def test_oracle_reduces_to_naive_when_label_constant():
    rng = np.random.default_rng(1)
    t = rng.integers(0, 2, 200)
    y = rng.standard_normal(200) + t
    naive = naive_ate(t, y)
    oracle = oracle_ate(t, y, np.zeros(200))
    assert oracle.estimate == pytest.approx(naive.estimate, abs=1e-10)


def test_oracle_recovers_truth_under_label_confounding():
    rng = np.random.default_rng(2)
    n = 4000
    label = rng.integers(0, 2, n)
    m = np.where(label == 1, 0.7, 0.3)
    t = (rng.random(n) < m).astype(int)
    y = 2.0 * t - 3.0 * label + rng.standard_normal(n)
    report = oracle_ate(t, y, label)
    assert abs(report.estimate - 2.0) < 3 * report.std_error
    again = oracle_ate(t, y, label)
    assert again.estimate == report.estimate  # deterministic


def test_oracle_collinear_label():
    t = np.array([0, 1, 0, 1, 0, 1])
    y = np.arange(6, dtype=float)
    with pytest.raises(CollinearityError):
        oracle_ate(t, y, t.copy())


# --- S-learner ------------------------------------------------------------------


def test_s_learner_exact_linear_model():
    rng = np.random.default_rng(3)
    n, d = 200, 3
    z = rng.standard_normal((n, d))
    t = rng.integers(0, 2, n)
    beta = np.array([1.0, -2.0, 0.5])
    y = 2.0 * t + z @ beta  # no noise, exactly the OLS model class
    ds = RepresentationSet(z=z, t=t, y=y)
    report = s_learner_ate(ds, OlsSpec())
    assert report.estimate == pytest.approx(2.0, abs=1e-6)


def test_s_learner_constant_outcome():
    rng = np.random.default_rng(4)
    ds = RepresentationSet(z=rng.standard_normal((50, 2)),
                           t=rng.integers(0, 2, 50), y=np.full(50, 3.0))
    report = s_learner_ate(ds, OlsSpec())
    assert report.estimate == pytest.approx(0.0, abs=1e-8)


# --- orthogonalized score ---------------------------------------------------------


def test_score_residual_terms_vanish_on_truth():
    g1 = np.array([1.0, 2.0])
    g0 = np.array([0.5, -1.0])
    # t=1 with y=g1: rho = g1 - g0
    rho = evaluate_score(np.ones(2), g1, g1, g0, np.full(2, 0.3))
    np.testing.assert_allclose(rho, g1 - g0)
    # t=0 with y=g0: same
    rho0 = evaluate_score(np.zeros(2), g0, g1, g0, np.full(2, 0.3))
    np.testing.assert_allclose(rho0, g1 - g0)


def test_score_hand_value():
    rho = evaluate_score(np.array([1.0]), np.array([3.0]), np.array([1.0]),
                         np.array([0.0]), np.array([0.5]))
    assert rho[0] == pytest.approx(5.0)  # 1 - 0 + (3-1)/0.5


def test_score_rejects_bad_propensities():
    ones = np.ones(2)
    with pytest.raises(ValidationError):
        evaluate_score(ones, ones, ones, ones, np.array([0.0, 0.5]))
    with pytest.raises(ValidationError):
        evaluate_score(ones, ones, ones, ones, np.array([0.5, 1.0]))


def test_four_row_hand_dataset_scores():
    # g(1,z)=1, g(0,z)=0, m=0.5, y=t: every score equals 1
    t = np.array([1.0, 0.0, 1.0, 0.0])
    y = t.copy()
    g1, g0, m = np.ones(4), np.zeros(4), np.full(4, 0.5)
    rho = evaluate_score(t, y, g1, g0, m)
    np.testing.assert_allclose(rho, 1.0)
    assert rho.mean() == pytest.approx(1.0)


# --- DML AIPW ----------------------------------------------------------------------


def test_dml_aipw_agrees_with_naive_when_randomized():
    rng = np.random.default_rng(5)
    n = 2000
    z = rng.standard_normal((n, 3))
    t = (rng.random(n) < 0.5).astype(np.uint8)
    y = 1.5 * t + rng.standard_normal(n)
    ds = RepresentationSet(z=z, t=t, y=y)
    dml = dml_aipw_ate(ds, OlsSpec(), LogisticSpec(lam=0.0), seed=1)
    naive = naive_ate(t, y)
    assert abs(dml.estimate - naive.estimate) < 3 * naive.std_error
    assert abs(dml.estimate - 1.5) < 3 * dml.std_error


def test_dml_aipw_recovers_ate_under_confounding():
    ds, _ = linear_confounded_set(6, n=2000)
    report = dml_aipw_ate(ds, OlsSpec(), LogisticSpec(lam=0.0), seed=2)
    assert abs(report.estimate - 2.0) < 3 * report.std_error
    naive = naive_ate(ds.t, ds.y)
    assert abs(naive.estimate - 2.0) > 3 * naive.std_error  # confounded


def test_dml_aipw_report_shape():
    ds, _ = linear_confounded_set(7, n=300)
    report = dml_aipw_ate(ds, OlsSpec(), LogisticSpec(lam=0.0), k=3, seed=0)
    assert len(report.per_fold_estimates) == 3
    assert report.n_used == 300
    payload = report.to_json_dict()
    assert set(payload) == {"method", "estimate", "std_error", "ci_low",
                            "ci_high", "level", "n", "folds", "warnings"}


def test_dml_aipw_requires_minimum_arm_size():
    rng = np.random.default_rng(8)
    z = rng.standard_normal((20, 2))
    t = np.zeros(20, dtype=np.uint8)
    t[:3] = 1  # only 3 treated < 2k with k=2
    ds = RepresentationSet(z=z, t=t, y=rng.standard_normal(20))
    with pytest.raises(EmptyArmError):
        dml_aipw_ate(ds, OlsSpec(), LogisticSpec(lam=0.0), k=2, seed=0)


def test_dml_aipw_overlap_warning():
    rng = np.random.default_rng(9)
    n = 600
    z = rng.standard_normal((n, 1)) * 3.0
    m = 1.0 / (1.0 + np.exp(-4.0 * z[:, 0]))  # extreme propensities
    t = (rng.random(n) < m).astype(np.uint8)
    y = 2.0 * t + z[:, 0] + rng.standard_normal(n)
    ds = RepresentationSet(z=z, t=t, y=y)
    with pytest.warns(OverlapWarning):
        report = dml_aipw_ate(ds, OlsSpec(), LogisticSpec(lam=0.0),
                              clip_eps=0.2, seed=3)
    assert any("overlap" in w for w in report.warnings)


def test_ci_level_monotonicity():
    ds, _ = linear_confounded_set(10, n=500)
    lo = dml_aipw_ate(ds, OlsSpec(), LogisticSpec(lam=0.0), seed=4, level=0.95)
    hi = dml_aipw_ate(ds, OlsSpec(), LogisticSpec(lam=0.0), seed=4, level=0.99)
    assert hi.ci_low < lo.ci_low and hi.ci_high > lo.ci_high
    assert hi.estimate == lo.estimate


def test_cross_fit_hygiene_sentinel():
    # poisoning one fold's outcomes after fitting must change only that
    # fold's scores, never the fitted nuisances or other folds' scores
    ds, _ = linear_confounded_set(11, n=400)
    folds = make_folds(ds.n, 2, 7)
    models = fit_fold_nuisances(ds, folds, OlsSpec(), LogisticSpec(lam=0.0))
    clean, _ = aipw_fold_scores(ds, folds, models, clip_eps=0.01)
    params_before = [m.g1.coef.copy() for m in models]

    poisoned_y = ds.y.copy()
    fold0 = folds.indices(0)
    poisoned_y[fold0] += 100.0
    poisoned = RepresentationSet(z=ds.z, t=ds.t, y=poisoned_y, label=ds.label)
    dirty, _ = aipw_fold_scores(poisoned, folds, models, clip_eps=0.01)

    fold1 = folds.indices(1)
    assert np.array_equal(clean[fold1], dirty[fold1])
    assert not np.array_equal(clean[fold0], dirty[fold0])
    for before, model in zip(params_before, models):
        np.testing.assert_array_equal(before, model.g1.coef)


def test_dml_ilt_invariance_linear_nuisances():
    from repcause.transforms import apply, sample_orthogonal

    ds, _ = linear_confounded_set(12, n=800, d=5)
    base = dml_aipw_ate(ds, OlsSpec(), LogisticSpec(lam=0.0), seed=5)
    for qseed in range(3):
        rotated = apply(ds, sample_orthogonal(5, qseed))
        report = dml_aipw_ate(rotated, OlsSpec(), LogisticSpec(lam=0.0), seed=5)
        assert abs(report.estimate - base.estimate) < 1e-5


def test_double_robustness_directions():
    # (a) true g with wrong constant m, (b) true m with wrong constant g
    rng = np.random.default_rng(13)
    reps = 200
    bias_a = np.empty(reps)
    bias_b = np.empty(reps)
    n = 500
    for r in range(reps):
        rng_r = np.random.default_rng(100 + r)
        z = rng_r.standard_normal((n, 2))
        m = 1.0 / (1.0 + np.exp(-z[:, 0]))
        t = (rng_r.random(n) < m).astype(float)
        g0 = z[:, 0] + 0.5 * z[:, 1]
        g1 = 2.0 + g0
        y = np.where(t == 1, g1, g0) + rng_r.standard_normal(n)
        wrong_m = np.full(n, 0.35)
        wrong_g1 = np.full(n, 0.7)
        wrong_g0 = np.full(n, -0.2)
        bias_a[r] = evaluate_score(t, y, g1, g0, wrong_m).mean() - 2.0
        bias_b[r] = evaluate_score(t, y, wrong_g1, wrong_g0, m).mean() - 2.0
    for bias in (bias_a, bias_b):
        mc_se = bias.std(ddof=1) / np.sqrt(reps)
        assert abs(bias.mean()) < 4 * mc_se


# --- DML partialling-out -------------------------------------------------------------


def test_partialling_out_hand_residuals():
    theta, se = partialling_out_from_residuals(
        np.array([-0.5, 0.5, -0.5, 0.5]), np.array([-1.0, 1.0, -1.0, 1.0])
    )
    assert theta == pytest.approx(2.0)
    assert se == pytest.approx(0.0)


def test_partialling_out_constant_nuisances_reduce_to_ols_slope():
    rng = np.random.default_rng(14)
    t = rng.integers(0, 2, 300).astype(float)
    y = 1.2 * t + rng.standard_normal(300)
    theta, _ = partialling_out_from_residuals(t - t.mean(), y - y.mean())
    slope = np.polyfit(t, y, 1)[0]
    assert theta == pytest.approx(slope, abs=1e-12)


def test_partialling_out_exact_plm():
    ds, _ = linear_confounded_set(15, n=2000)
    report = dml_partialling_out_ate(ds, OlsSpec(), LogisticSpec(lam=0.0), seed=6)
    assert abs(report.estimate - 2.0) < 3 * report.std_error
    assert report.method == "dml_partialling_out"


def test_partialling_out_mean_nuisances_close_to_naive_slope():
    rng = np.random.default_rng(16)
    t = rng.integers(0, 2, 400).astype(np.uint8)
    y = 0.8 * t + rng.standard_normal(400)
    ds = RepresentationSet(z=rng.standard_normal((400, 2)), t=t, y=y)
    report = dml_partialling_out_ate(ds, MeanSpec(), MeanSpec(), seed=1)
    slope = np.polyfit(t.astype(float), y, 1)[0]
    assert abs(report.estimate - slope) < 0.05  # fold means vs global mean


def test_partialling_out_degenerate_residuals():
    with pytest.raises(DegenerateResidualizationError):
        partialling_out_from_residuals(np.zeros(10), np.ones(10))
