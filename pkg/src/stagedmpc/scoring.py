"""Dirichlet-multinomial scoring of staged trees.

All scores are log marginal likelihoods.  Stage vectors are pooled
componentwise by edge position, so the members of a stage must share a
signature.
"""
from __future__ import annotations

import math
from collections.abc import Callable, Iterable, Mapping, Sequence
from dataclasses import dataclass

import numpy as np
from scipy.special import gammaln

from .tree import EventTree, Hyperstage


class ScoringError(ValueError):
    pass


@dataclass(frozen=True)
class PriorSpec:
    """Leaf-path prior: Dirichlet pseudo-counts induced by masses on leaves."""

    alpha_total: float
    path_mass: dict[int, float]
    edge_alpha: dict[int, tuple[float, ...]]

    def alpha(self, s: int) -> np.ndarray:
        return np.asarray(self.edge_alpha[s], dtype=float)


def leaf_path_prior(
    tree: EventTree,
    alpha_total: float | None = None,
    weights: str | Mapping[int, float] | Callable[[EventTree, int], float] = "uniform",
) -> PriorSpec:
    """Distribute ``alpha_total`` over root-to-leaf paths.

    ``alpha_total`` defaults to the number of leaves.  ``weights`` is
    ``"uniform"``, a mapping leaf -> relative weight, or a callable
    ``(tree, leaf) -> relative weight``; masses are normalised to sum to
    ``alpha_total``.  Each edge's pseudo-count is the mass of the leaves
    below it.
    """
    leaves = tree.leaves
    if alpha_total is None:
        alpha_total = float(len(leaves))
    if not alpha_total > 0:
        raise ScoringError(f"alpha_total must be positive, got {alpha_total}")
    if weights == "uniform":
        raw = {leaf: 1.0 for leaf in leaves}
    elif callable(weights):
        raw = {leaf: float(weights(tree, leaf)) for leaf in leaves}
    elif isinstance(weights, Mapping):
        raw = {leaf: float(weights[leaf]) for leaf in leaves}
    else:
        raise ScoringError(f"unknown leaf-mass rule {weights!r}")
    if any(not w > 0 for w in raw.values()):
        raise ScoringError("leaf weights must be positive")
    scale = alpha_total / math.fsum(raw.values())
    path_mass = {leaf: raw[leaf] * scale for leaf in leaves}
    return prior_from_path_mass(tree, path_mass, alpha_total)


def prior_from_path_mass(
    tree: EventTree, path_mass: Mapping[int, float], alpha_total: float | None = None
) -> PriorSpec:
    if set(path_mass) != set(tree.leaves):
        raise ScoringError("path masses do not cover exactly the leaves of the tree")
    below = tree.leaf_descendants
    edge_alpha = {
        s: tuple(math.fsum(path_mass[leaf] for leaf in below[e.child]) for e in tree.edges[s])
        for s in tree.situations
    }
    if alpha_total is None:
        alpha_total = math.fsum(path_mass.values())
    return PriorSpec(float(alpha_total), dict(path_mass), edge_alpha)


def _check_vectors(n, a) -> tuple[np.ndarray, np.ndarray]:
    n = np.asarray(n, dtype=float)
    a = np.asarray(a, dtype=float)
    if n.shape != a.shape or n.ndim != 1 or n.size == 0:
        raise ScoringError(f"count and pseudo-count vectors must match: {n.shape} vs {a.shape}")
    if np.any(a <= 0):
        raise ScoringError("pseudo-counts must be strictly positive")
    if np.any(n < 0):
        raise ScoringError("counts must be nonnegative")
    return n, a


def stage_scores(n: np.ndarray, a: np.ndarray) -> np.ndarray:
    """Vectorised stage score over the last axis; no validation."""
    return (np.sum(gammaln(a + n) - gammaln(a), axis=-1)
            + gammaln(np.sum(a, axis=-1)) - gammaln(np.sum(a + n, axis=-1)))


def stage_score(n: Sequence[float], a: Sequence[float]) -> float:
    """Log Dirichlet-multinomial marginal likelihood of counts ``n`` under ``a``."""
    n, a = _check_vectors(n, a)
    return float(stage_scores(n, a))


def posterior_mean(n: Sequence[float], a: Sequence[float]) -> np.ndarray:
    n, a = _check_vectors(n, a)
    return (a + n) / (a.sum() + n.sum())


@dataclass(frozen=True)
class Stage:
    members: tuple[int, ...]
    hyperset: int
    n: np.ndarray
    a: np.ndarray
    score: float

    @property
    def key(self) -> int:
        return self.members[0]


def make_stage(members: Iterable[int], hyperset: int, n, a) -> Stage:
    n = np.asarray(n, dtype=float)
    a = np.asarray(a, dtype=float)
    return Stage(tuple(sorted(members)), hyperset, n, a, float(stage_scores(n, a)))


def merge_stages(s1: Stage, s2: Stage) -> Stage:
    if s1.hyperset != s2.hyperset:
        raise ScoringError(f"cannot merge stages from hypersets {s1.hyperset} and {s2.hyperset}")
    if s1.n.shape != s2.n.shape:
        raise ScoringError("cannot merge stages of different out-degree")
    return make_stage(s1.members + s2.members, s1.hyperset, s1.n + s2.n, s1.a + s2.a)


def merge_delta(s1: Stage, s2: Stage) -> float:
    """Score change from pooling two stages of the same hyperset."""
    return merge_stages(s1, s2).score - s1.score - s2.score


class Staging:
    """A partition of the situations into stages refining a hyperstage.

    Stage ids are canonical: stages are ordered by their smallest member.
    """

    def __init__(self, tree: EventTree, prior: PriorSpec, hyperstage: Hyperstage,
                 blocks: Iterable[Iterable[int]]):
        self.tree = tree
        self.prior = prior
        self.hyperstage = hyperstage
        owner = hyperstage.index_of()
        stages = []
        seen: set[int] = set()
        for block in blocks:
            block = tuple(sorted(block))
            if not block:
                raise ScoringError("empty stage")
            hs = {owner.get(s) for s in block}
            if None in hs:
                raise ScoringError(f"stage {block} contains a node outside the hyperstage")
            if len(hs) != 1:
                raise ScoringError(f"stage {block} spans several hypersets")
            if seen & set(block):
                raise ScoringError(f"stage {block} overlaps another stage")
            seen |= set(block)
            sig = tree.signature(block[0])
            if any(tree.signature(s) != sig for s in block):
                raise ScoringError(f"stage {block} mixes signatures")
            n = np.sum([tree.counts(s) for s in block], axis=0)
            a = np.sum([prior.edge_alpha[s] for s in block], axis=0)
            stages.append(make_stage(block, hs.pop(), n, a))
        if seen != set(tree.situations):
            raise ScoringError("stages do not cover all situations")
        stages.sort(key=lambda st: st.key)
        self.stages: tuple[Stage, ...] = tuple(stages)
        self.assignment = {s: i for i, st in enumerate(stages) for s in st.members}

    @classmethod
    def saturated(cls, tree: EventTree, prior: PriorSpec, hyperstage: Hyperstage) -> "Staging":
        return cls(tree, prior, hyperstage, [(s,) for s in tree.situations])

    @property
    def blocks(self) -> list[tuple[int, ...]]:
        return [st.members for st in self.stages]

    def stage_of(self, s: int) -> int:
        return self.assignment[s]

    def log_score(self) -> float:
        return math.fsum(st.score for st in self.stages)

    def merge(self, s1: int, s2: int) -> "Staging":
        """Staging with the stages containing situations ``s1`` and ``s2`` pooled."""
        i, j = self.assignment[s1], self.assignment[s2]
        if i == j:
            return self
        blocks = [b for k, b in enumerate(self.blocks) if k not in (i, j)]
        blocks.append(self.stages[i].members + self.stages[j].members)
        return Staging(self.tree, self.prior, self.hyperstage, blocks)

    def __eq__(self, other) -> bool:
        return isinstance(other, Staging) and self.blocks == other.blocks

    def __repr__(self) -> str:
        return f"Staging({self.blocks})"


def model_score(tree: EventTree, staging: Staging, prior: PriorSpec) -> float:
    """Log marginal likelihood of ``tree`` under ``staging`` and ``prior``."""
    total = []
    for st in staging.stages:
        n = np.sum([tree.counts(s) for s in st.members], axis=0)
        a = np.sum([prior.edge_alpha[s] for s in st.members], axis=0)
        total.append(stage_score(n, a))
    return math.fsum(total)


def saturated_score(tree: EventTree, prior: PriorSpec) -> float:
    return math.fsum(stage_score(tree.counts(s), prior.edge_alpha[s]) for s in tree.situations)


def check_prior(tree: EventTree, prior: PriorSpec, tol: float = 1e-9) -> None:
    """Raise unless the prior telescopes down the tree."""
    if abs(math.fsum(prior.path_mass.values()) - prior.alpha_total) > tol * max(1.0, prior.alpha_total):
        raise ScoringError("path masses do not sum to alpha_total")
    for s in tree.situations:
        incoming = prior.alpha_total if s == tree.root else _edge_alpha_into(tree, prior, s)
        if abs(math.fsum(prior.edge_alpha[s]) - incoming) > tol * max(1.0, incoming):
            raise ScoringError(f"pseudo-counts do not telescope at situation {s}")


def _edge_alpha_into(tree: EventTree, prior: PriorSpec, node: int) -> float:
    s, j = tree.parent[node]
    return prior.edge_alpha[s][j]


__all__ = [
    "PriorSpec", "Stage", "Staging", "ScoringError", "check_prior",
    "leaf_path_prior", "merge_delta", "merge_stages", "make_stage", "model_score",
    "posterior_mean", "prior_from_path_mass", "saturated_score", "stage_score", "stage_scores",
]
