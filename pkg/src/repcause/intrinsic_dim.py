"""kNN-based intrinsic-dimension estimators (MLE, ESS, lPCA).

All three operate on exact brute-force Euclidean neighbourhoods and are,
by construction, invariant under orthogonal transformations of the
features (distances, angles and covariance spectra are preserved).
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from .errors import DuplicateWarning, NumericsError, RepcauseWarning, ValidationError

ESS_REFERENCE_SEED = 170_924
ESS_REFERENCE_DRAWS = 100_000
ESS_MAX_CANDIDATE = 64

_ess_curve_cache: dict[int, np.ndarray] = {}


@dataclass(frozen=True)
class IdEstimate:
    method: str
    k_neighbors: int
    value: float
    per_point_values: np.ndarray | None = None


@dataclass(frozen=True)
class KnnResult:
    """Per point: the k smallest positive distances (ascending) and the
    matching neighbour indices; ties break by index."""

    distances: np.ndarray
    indices: np.ndarray


def knn(z, k: int, chunk: int | None = None) -> KnnResult:
    """Exact O(n^2) nearest neighbours; duplicate points (zero distance)
    are excluded with a DuplicateWarning.

    Distances use the direct difference form (not the expanded Gram trick)
    so results agree bit-for-bit with a naive per-pair scan.
    """
    z = np.asarray(z, dtype=np.float64)
    n, d = z.shape
    if not 1 <= k < n:
        raise ValidationError(f"need 1 <= k < n, got k={k}, n={n}")
    if chunk is None:
        chunk = max(1, int(5e7 / max(n * d, 1)))
    distances = np.empty((n, k))
    indices = np.empty((n, k), dtype=np.int64)
    dropped_zero = 0
    for start in range(0, n, chunk):
        stop = min(start + chunk, n)
        diff = z[start:stop, None, :] - z[None, :, :]
        dist = np.sqrt((diff * diff).sum(axis=2))
        rows = np.arange(start, stop)
        dist[rows - start, rows] = np.inf  # self
        zero_mask = dist == 0.0
        if zero_mask.any():
            dropped_zero += int(zero_mask.sum())
            dist[zero_mask] = np.inf
        order = np.argsort(dist, axis=1, kind="stable")[:, :k]
        picked = np.take_along_axis(dist, order, axis=1)
        if not np.all(np.isfinite(picked)):
            raise ValidationError(
                "not enough distinct neighbours after removing duplicates"
            )
        distances[start:stop] = picked
        indices[start:stop] = order
    if dropped_zero:
        warnings.warn(
            f"excluded {dropped_zero} zero-distance neighbour pairs (duplicates)",
            DuplicateWarning,
        )
    return KnnResult(distances=distances, indices=indices)


def _clamp(value: float, d: int) -> float:
    return float(min(max(value, 1.0), float(d)))


def id_mle(z, k: int = 5, average: str = "harmonic") -> IdEstimate:
    """Levina-Bickel nearest-neighbour MLE.

    Per point, m_k(x) = [(1/(k-1)) sum_{j<k} ln(T_k/T_j)]^{-1}.  The global
    estimate pools the per-point log-ratio means and inverts once
    ("harmonic", the bias-corrected aggregation; at k = 5 the plain mean
    inflates flat-manifold estimates by ~4/3).  ``average="mean"`` gives the
    original average of the per-point values.
    """
    z = np.asarray(z, dtype=np.float64)
    if k < 2:
        raise ValidationError("MLE needs k >= 2")
    if average not in ("mean", "harmonic"):
        raise ValidationError("average must be 'mean' or 'harmonic'")
    dist = knn(z, k).distances
    if np.any(dist == 0.0):
        raise NumericsError("zero neighbour distance after deduplication")
    log_ratio = np.log(dist[:, -1:] / dist[:, :-1]).mean(axis=1)
    degenerate = log_ratio <= 0.0
    if degenerate.any():
        warnings.warn(
            f"skipped {int(degenerate.sum())} points with degenerate "
            "neighbourhoods", RepcauseWarning,
        )
        log_ratio = log_ratio[~degenerate]
        if log_ratio.size == 0:
            raise NumericsError("all neighbourhoods degenerate")
    per_point = 1.0 / log_ratio
    if average == "mean":
        value = float(per_point.mean())
    else:
        value = float(1.0 / np.mean(1.0 / per_point))
    return IdEstimate("mle", k, _clamp(value, z.shape[1]), per_point)


def ess_reference_curve(max_dim: int) -> np.ndarray:
    """E|sin(angle)| between two independent isotropic vectors in R^m for
    m = 1..max_dim, estimated once by Monte Carlo with a fixed seed.

    Index 0 is unused; curve[1] = 0 exactly (collinear vectors)."""
    max_dim = int(max_dim)
    cached = max(_ess_curve_cache) if _ess_curve_cache else 0
    if cached >= max_dim:
        return _ess_curve_cache[cached][: max_dim + 1]
    curve = np.zeros(max_dim + 1)
    curve[1] = 0.0
    rng = np.random.default_rng(ESS_REFERENCE_SEED)
    for m in range(2, max_dim + 1):
        u = rng.standard_normal((ESS_REFERENCE_DRAWS, m))
        v = rng.standard_normal((ESS_REFERENCE_DRAWS, m))
        cos = (u * v).sum(axis=1) / (
            np.linalg.norm(u, axis=1) * np.linalg.norm(v, axis=1)
        )
        curve[m] = float(np.mean(np.sqrt(np.maximum(1.0 - cos * cos, 0.0))))
    _ess_curve_cache[max_dim] = curve
    return curve


def _invert_ess(stat: float, curve: np.ndarray) -> float:
    top = len(curve) - 1
    if stat <= curve[1]:
        return 1.0
    if stat >= curve[top]:
        return float(top)
    m = int(np.searchsorted(curve[1:], stat) + 1)  # first m with curve[m] >= stat
    lo, hi = curve[m - 1], curve[m]
    return (m - 1) + (stat - lo) / (hi - lo)


def id_ess(z, k: int = 25) -> IdEstimate:
    """Expected simplex skewness: per neighbourhood, the mean |sin| of the
    angle between neighbour-direction pairs (the height-to-edge ratio of
    the spanned 2-vertex simplex), inverted against the isotropic Gaussian
    reference curve; the global estimate is the per-point median."""
    z = np.asarray(z, dtype=np.float64)
    n, d = z.shape
    if k < 2:
        raise ValidationError("ESS needs k >= 2")
    result = knn(z, k)
    max_dim = min(k - 1, ESS_MAX_CANDIDATE)
    curve = ess_reference_curve(max_dim)
    iu = np.triu_indices(k, 1)
    per_point = np.full(n, np.nan)
    skipped = 0
    for i in range(n):
        vectors = z[result.indices[i]] - z[i]
        norms = np.linalg.norm(vectors, axis=1)
        if np.all(norms == 0.0):
            skipped += 1
            continue
        unit = vectors[norms > 0] / norms[norms > 0, None]
        if unit.shape[0] < 2:
            skipped += 1
            continue
        cos = unit @ unit.T
        m = unit.shape[0]
        pairs = cos[np.triu_indices(m, 1)] if m != k else cos[iu]
        stat = float(np.mean(np.sqrt(np.maximum(1.0 - pairs * pairs, 0.0))))
        per_point[i] = _invert_ess(stat, curve)
    if skipped:
        warnings.warn(f"skipped {skipped} rank-0 neighbourhoods", RepcauseWarning)
    valid = per_point[~np.isnan(per_point)]
    if valid.size == 0:
        raise NumericsError("no usable neighbourhoods for ESS")
    return IdEstimate("ess", k, _clamp(float(np.median(valid)), d), per_point)


def id_lpca(z, k: int = 50, alpha: float = 0.05) -> IdEstimate:
    """Local PCA with the Fukunaga-Olsen rule: per point, count eigenvalues
    of the neighbourhood covariance above alpha * lambda_max; the global
    estimate is the median of the local counts."""
    z = np.asarray(z, dtype=np.float64)
    n, d = z.shape
    if k < 2:
        raise ValidationError("lPCA needs k >= 2")
    if not 0.0 < alpha < 1.0:
        raise ValidationError("alpha must lie in (0, 1)")
    result = knn(z, k)
    local = np.full(n, -1, dtype=np.int64)
    for i in range(n):
        nb = np.vstack([z[i][None, :], z[result.indices[i]]])
        centered = nb - nb.mean(axis=0)
        sv = np.linalg.svd(centered, compute_uv=False)
        eig = sv * sv / nb.shape[0]
        if eig[0] <= 0.0:
            continue  # zero covariance: local dimension 0, excluded
        local[i] = int(np.sum(eig > alpha * eig[0]))
    valid = local[local >= 0]
    if valid.size == 0:
        raise NumericsError("no usable neighbourhoods for lPCA")
    return IdEstimate(
        "lpca", k, _clamp(float(np.median(valid)), d),
        local.astype(np.float64),
    )


_ESTIMATORS = {"mle": id_mle, "ess": id_ess, "lpca": id_lpca}


def estimate_id(z, method: str, k: int | None = None, alpha: float = 0.05
                ) -> IdEstimate:
    if method not in _ESTIMATORS:
        raise ValidationError(f"unknown ID method {method!r}")
    defaults = {"mle": 5, "ess": 25, "lpca": 50}
    k = defaults[method] if k is None else k
    if method == "lpca":
        return id_lpca(z, k=k, alpha=alpha)
    return _ESTIMATORS[method](z, k=k)


def id_invariance_gap(z, q: np.ndarray, method: str, k: int | None = None,
                      alpha: float = 0.05) -> dict:
    """Estimate on raw vs orthogonally transformed features; the gap should
    vanish (up to eigen-solver tolerance) for any orthogonal q."""
    raw = estimate_id(z, method, k=k, alpha=alpha)
    rotated = estimate_id(np.asarray(z) @ np.asarray(q).T, method, k=k, alpha=alpha)
    return {
        "raw": raw.value,
        "transformed": rotated.value,
        "gap": abs(raw.value - rotated.value),
    }
