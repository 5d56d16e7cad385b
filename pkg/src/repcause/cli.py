"""Command-line interface: reproducible, config-driven runs over the library.

Subcommands: ``estimate``, ``simulate``, ``experiment``, ``id``, ``rotate``,
``rate``, ``validate``.  All randomness flows from ``--seed``; identical
(config, seed) pairs produce byte-identical outputs.  Every output file
starts with a header block echoing the package version, the seed and the
fully-resolved configuration.
"""
from __future__ import annotations

import argparse
import json
import os
import sys
from dataclasses import asdict
from pathlib import Path

import numpy as np

try:
    import tomllib
except ModuleNotFoundError:  # Python 3.10
    import tomli as tomllib

from . import __version__
from .data import load_representations, save_representations
from .errors import RepcauseError
from .hcm import full_hcm_spec
from .intrinsic_dim import estimate_id
from .learners import MlpSpec, make_spec
from .simulate import (
    ComplexConfounder,
    ConfoundingSpec,
    EstimatorConfig,
    ManifoldLabelGenerator,
    ManifoldSampler,
    ProductConfounder,
    SparseLinearConfounder,
    run_coverage_experiment,
    run_estimator,
    run_rate_experiment,
)
from .transforms import sparsity_rotation_curve


class ConfigError(RepcauseError):
    """Bad flag/config combination; maps to exit code 2."""


def _env_threads() -> int:
    raw = os.environ.get("REPCAUSE_THREADS", "1")
    try:
        return max(1, int(raw))
    except ValueError:
        return 1


def _load_config_section(path: str | None, section: str) -> dict:
    if path is None:
        return {}
    with open(path, "rb") as fh:
        data = tomllib.load(fh)
    unknown = set(data) - {section}
    if unknown:
        raise ConfigError(f"unknown top-level config section(s): {sorted(unknown)}")
    return data.get(section, {})


def _check_keys(table: dict, allowed: set[str], where: str) -> None:
    unknown = set(table) - allowed
    if unknown:
        raise ConfigError(f"unknown key(s) in {where}: {sorted(unknown)}")


def _resolve(flag_value, config: dict, key: str, default):
    if flag_value is not None:
        return flag_value
    if key in config:
        return config[key]
    return default


def _header_lines(seed: int, config: dict) -> list[str]:
    return [
        f"# repcause {__version__}",
        f"# seed = {seed}",
        f"# config = {json.dumps(config, sort_keys=True, default=str)}",
    ]


def _write_csv(path: Path, seed: int, config: dict, fieldnames: list[str],
               rows: list[list], extra_comments: list[str] = ()) -> None:
    lines = _header_lines(seed, config) + list(extra_comments)
    lines.append(",".join(fieldnames))
    for row in rows:
        lines.append(",".join(str(v) for v in row))
    path.write_text("\n".join(lines) + "\n")


def _emit_json(payload: dict, out: str | None) -> None:
    text = json.dumps(payload, indent=2, sort_keys=True, default=str)
    if out:
        Path(out).write_text(text + "\n")
    else:
        print(text)


def _learner_spec(name: str | None, options: dict | None, seed: int):
    if name is None:
        return None
    options = dict(options or {})
    if name.replace("-", "_") in ("lasso", "logistic_l1", "mlp", "mlp_reg",
                                  "mlp_clf", "rf", "forest", "forest_reg",
                                  "forest_clf"):
        options.setdefault("seed", seed)
    return make_spec(name, **options)


# --- subcommand: validate -----------------------------------------------------


def _cmd_validate(args) -> int:
    dataset = load_representations(args.path)
    flag = lambda a: "yes" if a is not None else "no"
    print(f"n={dataset.n} d={dataset.d} t={flag(dataset.t)} "
          f"y={flag(dataset.y)} label={flag(dataset.label)}")
    return 0


# --- subcommand: estimate -------------------------------------------------------


_ESTIMATE_KEYS = {"method", "g", "m", "g_options", "m_options", "k",
                  "clip_eps", "level", "seed"}


def _cmd_estimate(args) -> int:
    config = _load_config_section(args.config, "estimate")
    _check_keys(config, _ESTIMATE_KEYS, "[estimate]")
    seed = int(_resolve(args.seed, config, "seed", 0))
    method = _resolve(args.method, config, "method", None)
    if method is None:
        raise ConfigError("estimate needs --method (key: method)")
    method = method.replace("-", "_")
    g_name = _resolve(args.g, config, "g", None)
    m_name = _resolve(args.m, config, "m", None)
    cfg = EstimatorConfig(
        name=method,
        method=method,
        g=_learner_spec(g_name, config.get("g_options"), seed),
        m=_learner_spec(m_name, config.get("m_options"), seed),
        k=int(_resolve(args.k, config, "k", 2)),
        clip_eps=float(_resolve(args.clip_eps, config, "clip_eps", 0.01)),
        level=float(_resolve(args.level, config, "level", 0.95)),
    )
    dataset = load_representations(args.path)
    report = run_estimator(cfg, dataset, seed=seed)
    resolved = {"method": method, "g": g_name, "m": m_name, "k": cfg.k,
                "clip_eps": cfg.clip_eps, "level": cfg.level, "path": args.path}
    payload = {"meta": {"version": __version__, "seed": seed,
                        "config": resolved}}
    payload.update(report.to_json_dict())
    _emit_json(payload, args.out)
    return 0


# --- generators shared by simulate/experiment -----------------------------------


_GENERATOR_KEYS = {"kind", "n", "d", "d_manifold", "sine_amplitude",
                   "noise_sd", "true_ate", "label_coefficient",
                   "coefficient_seed", "latent_dim", "product_gain",
                   "rotation_seed", "support", "map_seed", "ae_epochs",
                   "identity_map", "ambient_noise_sd", "label_margin",
                   "signal_decay", "outcome_scale", "propensity_scale"}


def _build_generator(config: dict, seed: int):
    kind = config.get("kind", "label")
    n = int(config.get("n", 2000))
    d = int(config.get("d", 64))
    spec_kwargs = {}
    for field_name, key in (("true_ate", "true_ate"),
                            ("outcome_noise_sd", "noise_sd"),
                            ("label_coefficient", "label_coefficient"),
                            ("coefficient_seed", "coefficient_seed"),
                            ("latent_dim", "latent_dim"),
                            ("product_gain", "product_gain")):
        if key in config:
            spec_kwargs[field_name] = config[key]
    spec = ConfoundingSpec(kind=kind if kind != "sparse" else "label",
                           **spec_kwargs)
    map_seed = int(config.get("map_seed", seed))
    sampler_kwargs = dict(
        sine_amplitude=float(config.get("sine_amplitude", 0.3)),
        ambient_noise_sd=float(config.get("ambient_noise_sd", 0.0)),
        signal_decay=float(config.get("signal_decay", 0.0)),
    )
    if kind == "label":
        sampler = ManifoldSampler(
            d, int(config.get("d_manifold", 3)), seed=map_seed,
            identity_map=bool(config.get("identity_map", False)),
            label_margin=float(config.get("label_margin", 0.0)),
            **sampler_kwargs,
        )
        return ManifoldLabelGenerator(n, sampler, spec)
    if kind == "sparse":
        rotation_seed = config.get("rotation_seed")
        return SparseLinearConfounder(
            n, d, support=int(config.get("support", 3)), spec=spec,
            rotation_seed=None if rotation_seed is None else int(rotation_seed),
            outcome_scale=float(config.get("outcome_scale", 0.35)),
            propensity_scale=float(config.get("propensity_scale", 0.5)),
        )
    if kind == "complex":
        sampler = ManifoldSampler(
            d, int(config.get("d_manifold", 3)), seed=map_seed, **sampler_kwargs,
        )
        _, reps, _ = sampler.sample(n, map_seed + 1)
        ae_spec = None
        if "ae_epochs" in config:
            from .learners import AutoencoderSpec

            ae_spec = AutoencoderSpec(epochs=int(config["ae_epochs"]))
        return ComplexConfounder(
            reps, spec, ae_spec=ae_spec,
            outcome_scale=float(config.get("outcome_scale", 1.0)),
            propensity_scale=float(config.get("propensity_scale", 1.0)),
        )
    if kind == "product":
        reps = np.random.default_rng(map_seed).standard_normal((n, d))
        return ProductConfounder(reps, spec)
    raise ConfigError(f"unknown generator kind {kind!r}")


def _cmd_simulate(args) -> int:
    config = _load_config_section(args.config, "simulate")
    _check_keys(config, _GENERATOR_KEYS | {"seed"}, "[simulate]")
    for key, value in (("kind", args.kind), ("n", args.n), ("d", args.d),
                       ("d_manifold", args.d_manifold)):
        if value is not None:
            config[key] = value
    seed = int(_resolve(args.seed, config, "seed", 0))
    config.pop("seed", None)
    generator = _build_generator(config, seed)
    dataset, truth = generator.generate(seed)
    save_representations(dataset, args.out)
    resolved = dict(sorted(config.items()))
    print(json.dumps({
        "version": __version__, "seed": seed, "config": resolved,
        "out": str(args.out), "n": dataset.n, "d": dataset.d,
        "true_ate": truth.true_ate,
    }, sort_keys=True))
    return 0


# --- subcommand: experiment ------------------------------------------------------


_EST_TABLE_KEYS = {"name", "method", "g", "m", "g_options", "m_options",
                   "k", "clip_eps", "level"}


def _estimator_configs(tables: list[dict], seed: int) -> list[EstimatorConfig]:
    if not tables:
        raise ConfigError("experiment needs at least one [[experiment.estimators]]")
    configs = []
    for i, table in enumerate(tables):
        _check_keys(table, _EST_TABLE_KEYS, f"estimators[{i}]")
        if "method" not in table:
            raise ConfigError(f"estimators[{i}] is missing 'method'")
        method = str(table["method"]).replace("-", "_")
        configs.append(EstimatorConfig(
            name=str(table.get("name", method)),
            method=method,
            g=_learner_spec(table.get("g"), table.get("g_options"), seed),
            m=_learner_spec(table.get("m"), table.get("m_options"), seed),
            k=int(table.get("k", 2)),
            clip_eps=float(table.get("clip_eps", 0.01)),
            level=float(table.get("level", 0.95)),
        ))
    return configs


def _cmd_experiment(args) -> int:
    config = _load_config_section(args.config, "experiment")
    _check_keys(config, _GENERATOR_KEYS | {"seed", "reps", "estimators"},
                "[experiment]")
    seed = int(_resolve(args.seed, config, "seed", 0))
    reps = int(_resolve(args.reps, config, "reps", 100))
    threads = args.threads if args.threads is not None else _env_threads()
    generator_config = {k: v for k, v in config.items()
                        if k in _GENERATOR_KEYS}
    generator = _build_generator(generator_config, seed)
    configs = _estimator_configs(config.get("estimators", []), seed)
    rows, summaries = run_coverage_experiment(generator, configs, reps=reps,
                                              seed=seed, threads=threads)
    resolved = dict(sorted(generator_config.items()))
    resolved["reps"] = reps
    resolved["estimators"] = [c.name for c in configs]
    out = Path(args.out)
    _write_csv(
        out, seed, resolved,
        ["rep", "estimator", "estimate", "se", "ci_low", "ci_high", "covered"],
        [[r.rep, r.estimator, repr(r.estimate), repr(r.std_error),
          repr(r.ci_low), repr(r.ci_high), int(r.covered)] for r in rows],
    )
    summary_payload = {
        "meta": {"version": __version__, "seed": seed, "config": resolved},
        "summaries": {name: asdict(s) for name, s in summaries.items()},
    }
    _emit_json(summary_payload, args.summary)
    return 0


# --- subcommand: id ---------------------------------------------------------------


def _cmd_id(args) -> int:
    dataset = load_representations(args.path)
    estimate = estimate_id(dataset.z, args.method, k=args.k, alpha=args.alpha)
    resolved = {"method": estimate.method, "k": estimate.k_neighbors,
                "alpha": args.alpha, "path": args.path}
    payload = {
        "meta": {"version": __version__, "seed": args.seed or 0,
                 "config": resolved},
        "method": estimate.method,
        "k": estimate.k_neighbors,
        "estimate": estimate.value,
    }
    _emit_json(payload, args.out)
    if args.per_point:
        values = estimate.per_point_values
        _write_csv(Path(args.per_point), args.seed or 0, resolved,
                   ["index", "value"],
                   [[i, repr(float(v))] for i, v in enumerate(values)])
    return 0


# --- subcommand: rotate -----------------------------------------------------------


def _cmd_rotate(args) -> int:
    dataset = load_representations(args.path)
    grid = None
    if args.grid_points is not None:
        from .learners import default_penalty_grid, lasso_lambda_max

        grid = default_penalty_grid(lasso_lambda_max(dataset.z, dataset.y),
                                    n_points=args.grid_points)
    curve = sparsity_rotation_curve(dataset, args.rotations, lambda_grid=grid,
                                    seed=args.seed or 0)
    resolved = {"rotations": args.rotations, "grid_points": args.grid_points,
                "path": args.path}
    _write_csv(Path(args.out), args.seed or 0, resolved,
               ["rotations", "nonzero_count"], [[r, c] for r, c in curve])
    return 0


# --- subcommand: rate -------------------------------------------------------------


def _cmd_rate(args) -> int:
    ambient = [int(v) for v in args.ambient.split(",")]
    n_grid = [int(v) for v in args.n_grid.split(",")]
    seed = args.seed or 0
    hcm = full_hcm_spec(args.d_manifold, level=args.hcm_level,
                        arity=min(args.hcm_arity, args.d_manifold),
                        smoothness=args.smoothness)
    mlp = MlpSpec(depth=args.depth, width=args.width, epochs=args.epochs,
                  seed=seed)
    rows, slopes = run_rate_experiment(hcm, args.d_manifold, ambient, n_grid,
                                       mlp, seed=seed, n_test=args.n_test)
    resolved = {"ambient": ambient, "n_grid": n_grid,
                "d_manifold": args.d_manifold, "hcm_level": args.hcm_level,
                "hcm_arity": args.hcm_arity, "smoothness": args.smoothness,
                "depth": args.depth, "width": args.width, "epochs": args.epochs}
    comments = [f"# slope d={d} : {slope!r}" for d, slope in sorted(slopes.items())]
    _write_csv(Path(args.out), seed, resolved, ["d", "n", "test_mse"],
               [[r.d_ambient, r.n_train, repr(r.test_mse)] for r in rows],
               extra_comments=comments)
    return 0


# --- parser -----------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="repcause",
        description="Doubly-robust ATE estimation from latent representations.",
    )
    parser.add_argument("--version", action="version",
                        version=f"repcause {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("validate", help="check a PTRZ/CSV file")
    p.add_argument("path")
    p.set_defaults(func=_cmd_validate)

    p = sub.add_parser("estimate", help="run one ATE estimator on a file")
    p.add_argument("path")
    p.add_argument("--method", choices=["naive", "oracle", "s-learner",
                                        "s_learner", "dml-aipw", "dml_aipw",
                                        "dml-plo", "dml_plo"])
    p.add_argument("--g", help="outcome learner name")
    p.add_argument("--m", help="propensity learner name")
    p.add_argument("--k", type=int)
    p.add_argument("--clip-eps", dest="clip_eps", type=float)
    p.add_argument("--level", type=float)
    p.add_argument("--seed", type=int)
    p.add_argument("--config")
    p.add_argument("--out")
    p.set_defaults(func=_cmd_estimate)

    p = sub.add_parser("simulate", help="write one synthetic dataset")
    p.add_argument("--kind", choices=["label", "sparse", "complex", "product"])
    p.add_argument("--n", type=int)
    p.add_argument("--d", type=int)
    p.add_argument("--d-manifold", dest="d_manifold", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--config")
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_simulate)

    p = sub.add_parser("experiment", help="repeated coverage experiment")
    p.add_argument("--config", required=True)
    p.add_argument("--reps", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--threads", type=int)
    p.add_argument("--out", default="experiment.csv")
    p.add_argument("--summary")
    p.set_defaults(func=_cmd_experiment)

    p = sub.add_parser("id", help="intrinsic dimension of a file's features")
    p.add_argument("path")
    p.add_argument("--method", choices=["mle", "ess", "lpca"], default="mle")
    p.add_argument("--k", type=int)
    p.add_argument("--alpha", type=float, default=0.05)
    p.add_argument("--seed", type=int)
    p.add_argument("--out")
    p.add_argument("--per-point", dest="per_point")
    p.set_defaults(func=_cmd_id)

    p = sub.add_parser("rotate", help="lasso support size under rotations")
    p.add_argument("path")
    p.add_argument("--rotations", type=int, default=5)
    p.add_argument("--grid-points", dest="grid_points", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--out", default="rotation_curve.csv")
    p.set_defaults(func=_cmd_rotate)

    p = sub.add_parser("rate", help="MLP error vs n across ambient dimensions")
    p.add_argument("--d-manifold", dest="d_manifold", type=int, default=2)
    p.add_argument("--ambient", default="10,100")
    p.add_argument("--n-grid", dest="n_grid", default="500,1000,2000,4000")
    p.add_argument("--hcm-level", dest="hcm_level", type=int, default=1)
    p.add_argument("--hcm-arity", dest="hcm_arity", type=int, default=2)
    p.add_argument("--smoothness", type=float, default=2.0)
    p.add_argument("--depth", type=int, default=3)
    p.add_argument("--width", type=int, default=32)
    p.add_argument("--epochs", type=int, default=120)
    p.add_argument("--n-test", dest="n_test", type=int, default=10_000)
    p.add_argument("--seed", type=int)
    p.add_argument("--out", default="rate_experiment.csv")
    p.set_defaults(func=_cmd_rate)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"repcause: config error: {exc}", file=sys.stderr)
        return 2
    except (RepcauseError, OSError, ValueError) as exc:
        print(f"repcause: error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    raise SystemExit(main())
