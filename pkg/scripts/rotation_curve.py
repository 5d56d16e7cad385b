#!/usr/bin/env python3
"""Lasso support size under composed random rotations of the features."""
from __future__ import annotations

import argparse

import numpy as np

from repcause.learners import default_penalty_grid, lasso_lambda_max
from repcause.simulate import gen_sparse_linear_outcome
from repcause.transforms import sparsity_rotation_curve


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--n", type=int, default=500)
    parser.add_argument("--d", type=int, default=50)
    parser.add_argument("--rotations", type=int, default=5)
    parser.add_argument("--seeds", type=int, default=20)
    parser.add_argument("--noise-sd", type=float, default=0.1)
    args = parser.parse_args()

    curves = []
    for seed in range(args.seeds):
        ds = gen_sparse_linear_outcome(args.n, args.d, support=3, seed=seed,
                                       noise_sd=args.noise_sd)
        grid = default_penalty_grid(lasso_lambda_max(ds.z, ds.y),
                                    n_points=16, floor=1e-2)
        curve = sparsity_rotation_curve(ds, args.rotations, lambda_grid=grid,
                                        seed=seed)
        curves.append([count for _, count in curve])
    mean_counts = np.mean(np.asarray(curves, dtype=float), axis=0)
    print("rotations,mean_nonzero_count")
    for r, count in enumerate(mean_counts):
        print(f"{r},{count:.2f}")


if __name__ == "__main__":
    main()
