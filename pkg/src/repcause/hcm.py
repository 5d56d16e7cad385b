"""Hierarchical composition targets: trees of smooth low-arity combiners
over coordinate projections, materialized as seeded evaluable functions.

A leaf is the projection x -> x_j (level 0); an internal node with p
children applies a smooth function of their outputs (level = 1 + deepest
child).  The collection of (smoothness, arity) pairs over internal nodes
is the tree's constraint set; the smallest s/p ratio governs how hard the
target is for a network to learn.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Union

import numpy as np

from .errors import InvalidSpecError


@dataclass(frozen=True)
class HcmLeaf:
    index: int


@dataclass(frozen=True)
class HcmNode:
    children: tuple
    smoothness: float = 2.0
    combiner: str = "random"  # "random", "sum" or "constant"

    def __post_init__(self):
        if len(self.children) < 1:
            raise InvalidSpecError("internal node needs at least one child")
        if self.smoothness <= 0:
            raise InvalidSpecError("smoothness must be positive")
        if self.combiner not in ("random", "sum", "constant"):
            raise InvalidSpecError(f"unknown combiner {self.combiner!r}")


HcmTree = Union[HcmLeaf, HcmNode]


@dataclass(frozen=True)
class HcmSpec:
    root: HcmTree
    input_dim: int

    def __post_init__(self):
        for leaf in _leaves(self.root):
            if not 0 <= leaf.index < self.input_dim:
                raise InvalidSpecError(
                    f"leaf index {leaf.index} outside [0, {self.input_dim})"
                )

    @property
    def level(self) -> int:
        return _level(self.root)

    def constraint_set(self) -> tuple[tuple[float, int], ...]:
        pairs = []
        _collect_pairs(self.root, pairs)
        return tuple(sorted(set(pairs)))

    def worst_pair(self) -> tuple[float, int] | None:
        pairs = self.constraint_set()
        if not pairs:
            return None
        return min(pairs, key=lambda sp: sp[0] / sp[1])


def _leaves(node: HcmTree):
    if isinstance(node, HcmLeaf):
        yield node
        return
    for child in node.children:
        yield from _leaves(child)


def _level(node: HcmTree) -> int:
    if isinstance(node, HcmLeaf):
        return 0
    return 1 + max(_level(c) for c in node.children)


def _collect_pairs(node: HcmTree, out: list) -> None:
    if isinstance(node, HcmLeaf):
        return
    out.append((float(node.smoothness), len(node.children)))
    for child in node.children:
        _collect_pairs(child, out)


def full_hcm_spec(input_dim: int, level: int, arity: int,
                  smoothness: float = 2.0) -> HcmSpec:
    """Complete arity^level tree with leaf indices cycling over the input."""
    if level < 0 or arity < 1 or input_dim < 1:
        raise InvalidSpecError("need level >= 0, arity >= 1, input_dim >= 1")
    counter = [0]

    def build(depth):
        if depth == 0:
            leaf = HcmLeaf(counter[0] % input_dim)
            counter[0] += 1
            return leaf
        return HcmNode(tuple(build(depth - 1) for _ in range(arity)),
                       smoothness=smoothness)

    return HcmSpec(root=build(level), input_dim=input_dim)


# --- materialized functions ---------------------------------------------------


@dataclass(frozen=True)
class LeafFn:
    index: int


@dataclass(frozen=True)
class CombineFn:
    child_ids: tuple[int, ...]
    combiner: str
    bias: float
    linear: np.ndarray
    quad: np.ndarray
    sine_amp: np.ndarray
    sine_freq: np.ndarray
    sine_phase: np.ndarray

    def apply(self, v: np.ndarray) -> np.ndarray:
        """v: (n, p) child values in child_ids order."""
        if self.combiner == "sum":
            return v.sum(axis=1)
        if self.combiner == "constant":
            return np.full(v.shape[0], self.bias)
        out = self.bias + v @ self.linear
        out += np.einsum("ni,ij,nj->n", v, self.quad, v)
        phases = v @ self.sine_freq.T + self.sine_phase
        out += np.sin(phases) @ self.sine_amp
        return out


class HcmFunction:
    """Evaluable target with the node coefficients exposed so independent
    interpreters can re-derive every value."""

    def __init__(self, spec: HcmSpec, seed: int):
        self.spec = spec
        self.seed = seed
        self.input_dim = spec.input_dim
        self.constraint_set = spec.constraint_set()
        nodes: list = []

        def build(node) -> int:
            if isinstance(node, HcmLeaf):
                nodes.append(LeafFn(node.index))
                return len(nodes) - 1
            child_ids = tuple(build(c) for c in node.children)
            p = len(child_ids)
            rng = np.random.default_rng([seed, len(nodes)])
            n_sines = 2
            fn = CombineFn(
                child_ids=child_ids,
                combiner=node.combiner,
                bias=float(rng.normal(0.0, 0.3)),
                linear=rng.standard_normal(p) / np.sqrt(p),
                quad=rng.normal(0.0, 0.3 / p, size=(p, p)),
                sine_amp=rng.normal(0.0, 0.5, size=n_sines),
                sine_freq=rng.standard_normal((n_sines, p)) / np.sqrt(p),
                sine_phase=rng.uniform(0.0, 2.0 * np.pi, size=n_sines),
            )
            nodes.append(fn)
            return len(nodes) - 1

        self.root_id = build(spec.root)
        self.nodes = tuple(nodes)

    def evaluate(self, x) -> np.ndarray:
        """Vectorized bottom-up evaluation over the rows of x."""
        x = np.atleast_2d(np.asarray(x, dtype=np.float64))
        if x.shape[1] != self.input_dim:
            raise InvalidSpecError(
                f"expected {self.input_dim} columns, got {x.shape[1]}"
            )
        values: list[np.ndarray | None] = [None] * len(self.nodes)
        for node_id, node in enumerate(self.nodes):
            if isinstance(node, LeafFn):
                values[node_id] = x[:, node.index]
            else:
                v = np.column_stack([values[c] for c in node.child_ids])
                values[node_id] = node.apply(v)
        return values[self.root_id]


def gen_hcm_function(spec: HcmSpec, seed: int) -> HcmFunction:
    return HcmFunction(spec, seed)
