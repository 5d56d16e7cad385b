"""Invertible linear transformations of the representation space and the
sparsity-destruction experiment under repeated random rotations.

Representations are only identified up to invertible linear maps, so every
transform here is a way of moving to another member of the same
equivalence class; downstream invariance tests check which estimators care.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .data import RepresentationSet
from .errors import (
    DegenerateTransformError,
    DimensionError,
    MissingFieldError,
    ValidationError,
)
from .learners import fit_lasso

ORTHOGONALITY_TOL = 1e-8
CONDITION_LIMIT = 1e6
RESAMPLE_BUDGET = 100
NONZERO_TOL = 1e-8

KINDS = ("orthogonal", "general-invertible", "permutation", "diagonal-scaling")


@dataclass(frozen=True)
class LinearTransform:
    q: np.ndarray
    kind: str
    seed: int = 0

    def __post_init__(self):
        q = np.asarray(self.q, dtype=np.float64)
        if q.ndim != 2 or q.shape[0] != q.shape[1]:
            raise ValidationError("transform matrix must be square")
        if self.kind not in KINDS:
            raise ValidationError(f"unknown transform kind {self.kind!r}")
        d = q.shape[0]
        if self.kind == "orthogonal":
            gap = np.max(np.abs(q.T @ q - np.eye(d)))
            if gap > ORTHOGONALITY_TOL:
                raise ValidationError(f"not orthogonal: max |Q'Q - I| = {gap:.3e}")
        elif self.kind == "permutation":
            ok = np.all(np.isin(q, (0.0, 1.0))) and np.all(
                q.sum(axis=0) == 1.0
            ) and np.all(q.sum(axis=1) == 1.0)
            if not ok:
                raise ValidationError("rows must be unit basis vectors")
        elif self.kind == "diagonal-scaling":
            if np.any(q[~np.eye(d, dtype=bool)] != 0.0) or np.any(np.diag(q) == 0.0):
                raise ValidationError("need a diagonal matrix with non-zero entries")
        else:
            cond = np.linalg.cond(q)
            if not np.isfinite(cond) or cond > 1e8:
                raise ValidationError(f"matrix badly conditioned: cond = {cond:.3e}")
        object.__setattr__(self, "q", q)
        q.setflags(write=False)

    @property
    def d(self) -> int:
        return self.q.shape[0]

    def inverse_matrix(self) -> np.ndarray:
        if self.kind == "orthogonal":
            return self.q.T
        return np.linalg.inv(self.q)


def sample_orthogonal(d: int, seed: int) -> LinearTransform:
    """Haar-distributed orthogonal matrix: QR of a standard-Gaussian matrix
    with the sign convention diag(R) > 0."""
    if d < 1:
        raise ValidationError("dimension must be >= 1")
    rng = np.random.default_rng(seed)
    g = rng.standard_normal((d, d))
    q, r = np.linalg.qr(g)
    signs = np.sign(np.diag(r))
    signs[signs == 0.0] = 1.0
    q = q * signs  # scales column j by sign(R_jj), making R_jj > 0
    return LinearTransform(q=q, kind="orthogonal", seed=seed)


def sample_invertible(d: int, seed: int) -> LinearTransform:
    """Standard-Gaussian matrix, resampled until its condition estimate is
    below 1e6 (a budget of 100 draws practically never runs out)."""
    if d < 1:
        raise ValidationError("dimension must be >= 1")
    rng = np.random.default_rng(seed)
    for _ in range(RESAMPLE_BUDGET):
        g = rng.standard_normal((d, d))
        if np.linalg.cond(g) < CONDITION_LIMIT:
            return LinearTransform(q=g, kind="general-invertible", seed=seed)
    raise DegenerateTransformError(
        f"no well-conditioned matrix in {RESAMPLE_BUDGET} draws (d={d})"
    )


def sample_permutation(d: int, seed: int) -> LinearTransform:
    if d < 1:
        raise ValidationError("dimension must be >= 1")
    rng = np.random.default_rng(seed)
    q = np.eye(d)[rng.permutation(d)]
    return LinearTransform(q=q, kind="permutation", seed=seed)


def sample_scaling(d: int, seed: int, low: float = 0.5, high: float = 2.0
                   ) -> LinearTransform:
    if d < 1:
        raise ValidationError("dimension must be >= 1")
    rng = np.random.default_rng(seed)
    scales = rng.uniform(low, high, size=d) * rng.choice((-1.0, 1.0), size=d)
    return LinearTransform(q=np.diag(scales), kind="diagonal-scaling", seed=seed)


def apply(dataset: RepresentationSet, transform: LinearTransform
          ) -> RepresentationSet:
    """Rows become Q z_i; treatment, outcome and labels are untouched."""
    if transform.d != dataset.d:
        raise DimensionError(
            f"transform is {transform.d}x{transform.d}, features have d={dataset.d}"
        )
    return dataset.with_z(dataset.z @ transform.q.T)


def compose_rotations(d: int, count: int, seed: int) -> LinearTransform:
    """Composition O_count ... O_1 of fresh Haar rotations, O_r drawn with
    seed ``seed + r``; count = 0 gives the identity."""
    q = np.eye(d)
    for r in range(1, count + 1):
        q = sample_orthogonal(d, seed + r).q @ q
    return LinearTransform(q=q, kind="orthogonal", seed=seed)


def count_nonzero_coefficients(model, tol: float = NONZERO_TOL) -> int:
    return int(np.sum(np.abs(model.coef) > tol))


def sparsity_rotation_curve(dataset: RepresentationSet, n_rotations: int,
                            lambda_grid=None, seed: int = 0
                            ) -> list[tuple[int, int]]:
    """Lasso support size after r = 0..n_rotations composed Haar rotations.

    Each step r adds one fresh rotation (seed + r) on top of the previous
    composition, refits the lasso of y on the rotated features with
    CV-selected penalty, and records how many coefficients exceed 1e-8 in
    absolute value.
    """
    if n_rotations < 0:
        raise ValidationError("n_rotations must be >= 0")
    if dataset.y is None:
        raise MissingFieldError("rotation curve needs a regression target y")
    y = dataset.y
    grid = None if lambda_grid is None else tuple(float(g) for g in lambda_grid)
    curve = []
    q = np.eye(dataset.d)
    for r in range(n_rotations + 1):
        if r > 0:
            q = sample_orthogonal(dataset.d, seed + r).q @ q
        model = fit_lasso(dataset.z @ q.T, y, cv_grid=grid, seed=seed)
        curve.append((r, count_nonzero_coefficients(model)))
    return curve
