import numpy as np
import pytest

from repcause.errors import DuplicateWarning, ValidationError
from repcause.intrinsic_dim import (
    estimate_id,
    ess_reference_curve,
    id_ess,
    id_lpca,
    id_mle,
    knn,
)
from repcause.simulate import gen_synthetic_manifold
from repcause.transforms import sample_orthogonal


def quadratic_scan_knn(z, k):
    # independent oracle: per-point full scan with explicit loops
    n = z.shape[0]
    out = np.empty((n, k))
    for i in range(n):
        dists = []
        for j in range(n):
            if j == i:
                continue
            d = float(np.sqrt(((z[i] - z[j]) ** 2).sum()))
            if d > 0.0:
                dists.append((d, j))
        dists.sort()
        out[i] = [d for d, _ in dists[:k]]
    return out


def test_knn_collinear_points():
    z = np.array([[0.0], [1.0], [2.0]])
    result = knn(z, 2)
    np.testing.assert_allclose(result.distances[0], [1.0, 2.0])
    np.testing.assert_allclose(result.distances[1], [1.0, 1.0])
    np.testing.assert_allclose(result.distances[2], [1.0, 2.0])


def test_knn_permutation_invariance():
    rng = np.random.default_rng(0)
    z = rng.standard_normal((40, 3))
    perm = rng.permutation(40)
    a = np.sort(knn(z, 4).distances, axis=None)
    b = np.sort(knn(z[perm], 4).distances, axis=None)
    np.testing.assert_array_equal(a, b)


def test_knn_matches_quadratic_scan_exactly():
    rng = np.random.default_rng(1)
    z = rng.standard_normal((100, 4))
    fast = knn(z, 10).distances
    slow = quadratic_scan_knn(z, 10)
    np.testing.assert_array_equal(fast, slow)


def test_knn_duplicates_warn_and_are_excluded():
    z = np.array([[0.0, 0.0], [0.0, 0.0], [1.0, 0.0], [2.0, 0.0]])
    with pytest.warns(DuplicateWarning):
        result = knn(z, 2)
    assert np.all(result.distances > 0)


def test_knn_validates_k():
    z = np.zeros((5, 2)) + np.arange(5)[:, None]
    with pytest.raises(ValidationError):
        knn(z, 5)
    with pytest.raises(ValidationError):
        knn(z, 0)


# --- MLE ---------------------------------------------------------------------


def test_mle_segment():
    rng = np.random.default_rng(5)
    z = rng.uniform(-1, 1, (2000, 1)) @ rng.standard_normal((1, 10))
    value = id_mle(z, k=5).value
    assert 0.8 <= value <= 1.3


def test_mle_plane():
    rng = np.random.default_rng(6)
    z = rng.uniform(-1, 1, (2000, 2)) @ rng.standard_normal((2, 10))
    value = id_mle(z, k=5).value
    assert 1.7 <= value <= 2.4


def test_mle_orthogonal_invariance():
    z, _ = gen_synthetic_manifold(800, 20, 2, smooth_map_seed=3, point_seed=4)
    q = sample_orthogonal(20, 8).q
    raw = id_mle(z).value
    rotated = id_mle(z @ q.T).value
    assert abs(raw - rotated) <= 1e-8


def test_mle_mean_variant_larger_at_small_k():
    rng = np.random.default_rng(7)
    z = rng.uniform(-1, 1, (1500, 2)) @ rng.standard_normal((2, 8))
    harmonic = id_mle(z, k=5, average="harmonic").value
    mean = id_mle(z, k=5, average="mean").value
    assert mean > harmonic  # uncorrected aggregation inflates


# --- ESS ---------------------------------------------------------------------


def test_ess_reference_curve_monotone_and_cached():
    curve = ess_reference_curve(24)
    assert curve[1] == 0.0
    assert np.all(np.diff(curve[1:]) > 0)
    again = ess_reference_curve(24)
    np.testing.assert_array_equal(curve, again)
    shorter = ess_reference_curve(10)
    np.testing.assert_array_equal(shorter, curve[:11])


def test_ess_plane():
    rng = np.random.default_rng(8)
    z = rng.uniform(-1, 1, (2000, 2)) @ rng.standard_normal((2, 10))
    value = id_ess(z, k=25).value
    assert 1.6 <= value <= 2.5


def test_ess_full_dimensional_gaussian():
    rng = np.random.default_rng(9)
    z = rng.standard_normal((2000, 5))
    value = id_ess(z, k=25).value
    assert 4.0 <= value <= 5.5


def test_ess_orthogonal_invariance():
    z, _ = gen_synthetic_manifold(800, 15, 2, smooth_map_seed=10, point_seed=11)
    q = sample_orthogonal(15, 12).q
    assert abs(id_ess(z).value - id_ess(z @ q.T).value) <= 1e-8


# --- lPCA --------------------------------------------------------------------


def test_lpca_exact_plane():
    rng = np.random.default_rng(13)
    z = rng.uniform(-1, 1, (500, 2)) @ rng.standard_normal((2, 12))
    assert id_lpca(z, k=50).value == 2.0


def test_lpca_plane_with_tiny_noise():
    rng = np.random.default_rng(14)
    base = rng.uniform(-1, 1, (800, 2)) @ rng.standard_normal((2, 12))
    scale = base.std()
    z = base + rng.normal(0, 1e-3 * scale, base.shape)
    assert id_lpca(z, k=50).value == 2.0


def test_lpca_orthogonal_invariance():
    z, _ = gen_synthetic_manifold(600, 12, 2, smooth_map_seed=15, point_seed=16)
    q = sample_orthogonal(12, 17).q
    assert abs(id_lpca(z).value - id_lpca(z @ q.T).value) <= 1e-8


# --- shared contracts -----------------------------------------------------------


def test_estimates_bounded_by_ambient_dimension():
    rng = np.random.default_rng(18)
    z = rng.standard_normal((400, 3))
    for method in ("mle", "ess", "lpca"):
        est = estimate_id(z, method, k=10)
        assert 1.0 <= est.value <= 3.0


def test_manifold_estimate_below_full_dimension():
    rng = np.random.default_rng(19)
    full = rng.standard_normal((1500, 10))
    for d_m in (1, 2):
        manifold = rng.uniform(-1, 1, (1500, d_m)) @ rng.standard_normal((d_m, 10))
        for method in ("mle", "ess", "lpca"):
            low = estimate_id(manifold, method)
            high = estimate_id(full, method)
            assert low.value <= high.value


def test_estimate_id_defaults():
    rng = np.random.default_rng(20)
    z = rng.standard_normal((300, 4))
    assert estimate_id(z, "mle").k_neighbors == 5
    assert estimate_id(z, "ess").k_neighbors == 25
    assert estimate_id(z, "lpca").k_neighbors == 50
    with pytest.raises(ValidationError):
        estimate_id(z, "twonn")
