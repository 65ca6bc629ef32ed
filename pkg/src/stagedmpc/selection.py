"""Greedy and exhaustive staging search.

``ahc`` merges the best pair of stages within any hyperset until no merge
improves the score.  ``mpc`` does the same but only between neighbours in a
fixed order of each hyperset, keyed on saturated posterior means, which caps
the candidates it considers at N(N-1)/2 per hyperset instead of (N^3-N)/6.
``exact_map`` enumerates stagings and serves as a test oracle.

Counters report candidates *considered*: every pair open to merging at
each step of a hyperset, whether or not its delta was cached.
"""
from __future__ import annotations

import itertools
import math
import time
from collections.abc import Iterator, Sequence
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .scoring import (PriorSpec, Stage, Staging, make_stage, merge_stages,
                      posterior_mean, saturated_score, stage_scores)
from .tree import EventTree, Hyperstage

ACCEPT_THRESHOLD = 1e-9
KEY_TIE_TOL = 1e-12
ENGINES = ("ahc", "mpc", "exact-all", "exact-interval")


class SelectionError(ValueError):
    pass


@dataclass(frozen=True)
class TraceStep:
    first: tuple[int, ...]
    second: tuple[int, ...]
    delta: float
    hyperset: int


@dataclass
class OrderedHyperset:
    hyperset: int
    situations: tuple[int, ...]
    keys: tuple[float, ...]
    clusters: list[tuple[int, ...]]
    cluster_keys: list[float]
    edge: int = 0

    @property
    def premerged(self) -> list[tuple[int, ...]]:
        return [c for c in self.clusters if len(c) > 1]


@dataclass
class SelectionResult:
    engine: str
    staging: Staging
    log_score: float
    saturated_score: float
    trace: list[TraceStep]
    forced: list[TraceStep]
    evaluated: list[int]
    scored: int
    elapsed: float
    orders: list[tuple[int, ...]] | None = None
    ordering_edge: int | None = None
    options: dict = field(default_factory=dict)

    @property
    def accepted(self) -> int:
        return len(self.trace)

    @property
    def total_evaluated(self) -> int:
        return sum(self.evaluated)


def _parallel_map(fn, items, threads: int):
    items = list(items)
    if threads <= 1 or len(items) <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, items))


def _pair_key(a: Stage, b: Stage) -> tuple[int, int]:
    return (min(a.key, b.key), max(a.key, b.key))


class _AllPairs:
    """Candidate state of one hyperset under unrestricted pairwise merging."""

    def __init__(self, index: int, stages: list[Stage], threads: int = 1):
        self.index = index
        self.stages: list[Stage | None] = list(stages)
        m = len(stages)
        self.evaluated = 0
        self.scored = 0
        self.n_active = m
        self.delta = np.full((m, m), -np.inf)
        if m < 2:
            return
        N = np.stack([s.n for s in stages])
        A = np.stack([s.a for s in stages])
        S = np.array([s.score for s in stages])
        self._N, self._A, self._S = N, A, S

        def rows(chunk):
            lo, hi = chunk
            block = stage_scores(N[lo:hi, None, :] + N[None, :, :],
                                 A[lo:hi, None, :] + A[None, :, :])
            self.delta[lo:hi] = block - S[lo:hi, None] - S[None, :]

        step = max(1, -(-m // max(threads, 1)))
        _parallel_map(rows, [(lo, min(m, lo + step)) for lo in range(0, m, step)], threads)
        np.fill_diagonal(self.delta, -np.inf)
        self.scored += m * (m - 1) // 2

    def best(self):
        c = self.n_active
        self.evaluated += c * (c - 1) // 2
        if c < 2:
            return None
        top = self.delta.max()
        if not top > ACCEPT_THRESHOLD:
            return None
        ii, jj = np.nonzero(self.delta == top)
        i, j = min(zip(ii.tolist(), jj.tolist()),
                   key=lambda p: _pair_key(self.stages[p[0]], self.stages[p[1]]))
        return float(top), _pair_key(self.stages[i], self.stages[j]), (min(i, j), max(i, j))

    def merge(self, pair) -> tuple[Stage, Stage]:
        i, j = pair
        a, b = self.stages[i], self.stages[j]
        merged = merge_stages(a, b)
        self.stages[i], self.stages[j] = merged, None
        self.n_active -= 1
        self._N[i], self._A[i], self._S[i] = merged.n, merged.a, merged.score
        self.delta[j, :] = -np.inf
        self.delta[:, j] = -np.inf
        live = np.array([k for k, s in enumerate(self.stages) if s is not None and k != i], dtype=int)
        if live.size:
            row = (stage_scores(self._N[i] + self._N[live], self._A[i] + self._A[live])
                   - self._S[i] - self._S[live])
            self.delta[i, live] = row
            self.delta[live, i] = row
            self.scored += live.size
        return a, b

    def final(self) -> list[Stage]:
        return [s for s in self.stages if s is not None]


class _Adjacent:
    """Candidate state of one hyperset restricted to neighbours in an order."""

    def __init__(self, index: int, clusters: list[Stage], edge: int = 0, reorder: bool = False):
        self.index = index
        self.clusters = list(clusters)
        self.edge = edge
        self.reorder = reorder
        self.evaluated = 0
        self.scored = 0
        self.deltas = [self._delta(k) for k in range(len(self.clusters) - 1)]

    def _delta(self, k: int) -> float:
        a, b = self.clusters[k], self.clusters[k + 1]
        self.scored += 1
        return merge_stages(a, b).score - a.score - b.score

    def best(self):
        self.evaluated += max(0, len(self.clusters) - 1)
        best = None
        for k, d in enumerate(self.deltas):
            if not d > ACCEPT_THRESHOLD:
                continue
            cand = (d, _pair_key(self.clusters[k], self.clusters[k + 1]), k)
            if best is None or d > best[0] or (d == best[0] and cand[1] < best[1]):
                best = cand
        return best

    def merge(self, k: int) -> tuple[Stage, Stage]:
        a, b = self.clusters[k], self.clusters[k + 1]
        self.clusters[k: k + 2] = [merge_stages(a, b)]
        if self.reorder:
            self.clusters.sort(key=lambda s: (_stage_key(s, self.edge), s.key))
            self.deltas = [self._delta(i) for i in range(len(self.clusters) - 1)]
            return a, b
        del self.deltas[k]
        if k > 0:
            self.deltas[k - 1] = self._delta(k - 1)
        if k < len(self.clusters) - 1:
            self.deltas[k] = self._delta(k)
        return a, b

    def final(self) -> list[Stage]:
        return list(self.clusters)


def _stage_key(stage: Stage, edge: int) -> float:
    return float(posterior_mean(stage.n, stage.a)[edge])


def _greedy(searches) -> list[TraceStep]:
    """Best-first over all hypersets: take the single best merge each step."""
    current = {k: s.best() for k, s in enumerate(searches)}
    trace = []
    while True:
        live = [(c[0], c[1], k) for k, c in current.items() if c is not None]
        if not live:
            return trace
        delta, _, k = min(live, key=lambda t: (-t[0], t[1]))
        search = searches[k]
        a, b = search.merge(current[k][2])
        trace.append(TraceStep(a.members, b.members, delta, search.index))
        current[k] = search.best()


def _initial_stages(tree: EventTree, prior: PriorSpec, members: Sequence[int], index: int):
    return [make_stage((s,), index, tree.counts(s), prior.edge_alpha[s]) for s in members]


def _result(engine, tree, prior, h, stages, trace, forced, evaluated, scored, t0, **extra):
    staging = Staging(tree, prior, h, [s.members for s in stages])
    return SelectionResult(
        engine=engine, staging=staging, log_score=staging.log_score(),
        saturated_score=saturated_score(tree, prior), trace=trace, forced=forced,
        evaluated=evaluated, scored=scored, elapsed=time.perf_counter() - t0, **extra)


def ahc(tree: EventTree, h: Hyperstage, prior: PriorSpec, threads: int = 1) -> SelectionResult:
    """Agglomerative hierarchical clustering from the saturated staging."""
    t0 = time.perf_counter()
    searches = _parallel_map(
        lambda k: _AllPairs(k, _initial_stages(tree, prior, h.hypersets[k], k), threads),
        range(len(h)), threads)
    trace = _greedy(searches)
    stages = [s for search in searches for s in search.final()]
    return _result("ahc", tree, prior, h, stages, trace, [],
                   [s.evaluated for s in searches], sum(s.scored for s in searches), t0)


def total_order(hyperset: Sequence[int], tree: EventTree, prior: PriorSpec,
                edge: int = 0, index: int = 0, tol: float = KEY_TIE_TOL) -> OrderedHyperset:
    """Order a hyperset by the saturated posterior mean of edge ``edge``.

    Situations whose keys agree within ``tol`` of a cluster's first key form
    one starting cluster.
    """
    for s in hyperset:
        if tree.out_degree(s) > 2:
            raise SelectionError(
                f"situation {s} has {tree.out_degree(s)} edges; resize the tree to binary first")
    keys = {s: float(posterior_mean(tree.counts(s), prior.edge_alpha[s])[edge]) for s in hyperset}
    ordered = sorted(hyperset, key=lambda s: (keys[s], s))
    clusters: list[list[int]] = []
    anchors: list[float] = []
    for s in ordered:
        if clusters and keys[s] - anchors[-1] <= tol:
            clusters[-1].append(s)
        else:
            clusters.append([s])
            anchors.append(keys[s])
    return OrderedHyperset(index, tuple(ordered), tuple(keys[s] for s in ordered),
                           [tuple(c) for c in clusters], anchors, edge)


def _premerge(order: OrderedHyperset, tree, prior) -> tuple[list[Stage], list[TraceStep]]:
    clusters, forced = [], []
    for members in order.clusters:
        stages = _initial_stages(tree, prior, members, order.hyperset)
        acc = stages[0]
        for nxt in stages[1:]:
            merged = merge_stages(acc, nxt)
            forced.append(TraceStep(acc.members, nxt.members,
                                    merged.score - acc.score - nxt.score, order.hyperset))
            acc = merged
        clusters.append(acc)
    return clusters, forced


def mpc(tree: EventTree, h: Hyperstage, prior: PriorSpec, threads: int = 1,
        edge: int = 0, reorder: bool = False) -> SelectionResult:
    """Mean posterior clustering on a binary tree.

    ``reorder`` re-sorts clusters by their pooled posterior mean after every
    merge; the default keeps the initial order fixed.
    """
    if not tree.is_binary:
        raise SelectionError("mpc needs a binary tree; apply binary_resize first")
    t0 = time.perf_counter()
    orders = [total_order(hs, tree, prior, edge, k) for k, hs in enumerate(h.hypersets)]
    forced: list[TraceStep] = []
    searches = []
    for order in orders:
        clusters, f = _premerge(order, tree, prior)
        forced.extend(f)
        searches.append(_Adjacent(order.hyperset, clusters, edge, reorder))
    trace = _greedy(searches)
    stages = [s for search in searches for s in search.final()]
    return _result("mpc", tree, prior, h, stages, trace, forced,
                   [s.evaluated for s in searches], sum(s.scored for s in searches), t0,
                   orders=[o.situations for o in orders], ordering_edge=edge,
                   options={"reorder": reorder})


def set_partitions(items: Sequence) -> Iterator[list[list]]:
    """All set partitions of ``items`` via restricted growth strings."""
    items = list(items)
    n = len(items)
    if n == 0:
        yield []
        return
    growth = [0] * n
    maxima = [0] * n
    while True:
        blocks: list[list] = [[] for _ in range(max(growth) + 1)]
        for item, g in zip(items, growth):
            blocks[g].append(item)
        yield blocks
        i = n - 1
        while i > 0 and growth[i] == maxima[i - 1] + 1:
            i -= 1
        if i == 0:
            return
        growth[i] += 1
        maxima[i] = max(maxima[i - 1], growth[i])
        for k in range(i + 1, n):
            growth[k] = 0
            maxima[k] = maxima[i]


def interval_partitions(items: Sequence) -> Iterator[list[list]]:
    """All splits of ``items`` into consecutive runs (2^(n-1) of them)."""
    items = list(items)
    n = len(items)
    if n == 0:
        yield []
        return
    for mask in range(1 << (n - 1)):
        blocks, start = [], 0
        for i in range(1, n):
            if mask >> (i - 1) & 1:
                blocks.append(items[start:i])
                start = i
        blocks.append(items[start:])
        yield blocks


def exact_map(tree: EventTree, h: Hyperstage, prior: PriorSpec, mode: str = "all",
              cap: int | None = None, edge: int = 0) -> SelectionResult:
    """Exhaustive MAP staging, hyperset by hyperset.

    ``mode="all"`` enumerates every set partition (default cap 10 situations
    per hyperset); ``mode="interval"`` enumerates runs of the mean-posterior
    order (default cap 20).
    """
    if mode not in ("all", "interval"):
        raise SelectionError(f"unknown exact mode {mode!r}")
    cap = cap if cap is not None else (10 if mode == "all" else 20)
    too_big = [(h.names[k], len(hs)) for k, hs in enumerate(h.hypersets) if len(hs) > cap]
    if too_big:
        raise SelectionError(f"hypersets exceed the exact-search cap of {cap}: {too_big}")
    t0 = time.perf_counter()
    stages, forced, evaluated, orders = [], [], [], []
    scored = 0
    for k, hs in enumerate(h.hypersets):
        if mode == "interval":
            members = total_order(hs, tree, prior, edge, k).situations
            orders.append(members)
            candidates = interval_partitions(members)
        else:
            members = tuple(hs)
            candidates = set_partitions(members)
        cache: dict[tuple[int, ...], Stage] = {}

        def block_stage(block):
            key = tuple(sorted(block))
            if key not in cache:
                n = np.sum([tree.counts(s) for s in key], axis=0)
                a = np.sum([prior.edge_alpha[s] for s in key], axis=0)
                cache[key] = make_stage(key, k, n, a)
            return cache[key]

        best, best_score, count = None, -math.inf, 0
        for blocks in candidates:
            count += 1
            score = math.fsum(block_stage(b).score for b in blocks)
            if score > best_score:
                best, best_score = blocks, score
        evaluated.append(count)
        scored += len(cache)
        for b in best:
            singles = [block_stage([s]) for s in b]
            acc = singles[0]
            for nxt in singles[1:]:
                merged = merge_stages(acc, nxt)
                forced.append(TraceStep(acc.members, nxt.members,
                                        merged.score - acc.score - nxt.score, k))
                acc = merged
            stages.append(acc)
    return _result(f"exact-{mode}", tree, prior, h, stages, [], forced, evaluated, scored, t0,
                   orders=orders or None, ordering_edge=edge if mode == "interval" else None)


def ahc_bound(n: int) -> int:
    return (n ** 3 - n) // 6


def mpc_bound(n: int, k: int = 2) -> int:
    """Worst-case candidates for MPC over a k-outcome variable with n situations."""
    return (k - 1) * n * (n - 1) // 2


def count_bounds(h: Hyperstage, engine: str) -> list[int]:
    """Per-hyperset worst-case number of candidates considered by ``engine``."""
    if engine in ("ahc", "ahc-binary"):
        return [ahc_bound(len(hs)) for hs in h.hypersets]
    if engine == "mpc":
        return [mpc_bound(len(hs)) for hs in h.hypersets]
    raise SelectionError(f"no candidate bound for engine {engine!r}")


def bound_curves(ns: Sequence[int], ks: Sequence[int] = (2, 3, 4)) -> list[dict]:
    """Rows of worst-case candidate counts against hyperset size."""
    rows = []
    for n in ns:
        row = {"N": n, "ahc": ahc_bound(n)}
        for k in ks:
            row[f"mpc_k{k}"] = mpc_bound(n, k)
        rows.append(row)
    return rows


def is_interval_partition(blocks: Sequence[Sequence[int]], order: Sequence[int]) -> bool:
    pos = {s: i for i, s in enumerate(order)}
    for b in blocks:
        idx = sorted(pos[s] for s in b if s in pos)
        if idx and idx[-1] - idx[0] + 1 != len(idx):
            return False
    return True


def replay(tree: EventTree, prior: PriorSpec, h: Hyperstage, result: SelectionResult,
           tol: float = 1e-9) -> float:
    """Re-apply ``result``'s merges from the saturated staging.

    Checks each recorded delta against a fresh computation and returns the
    score reached, which equals the saturated score plus all deltas.
    """
    owner = h.index_of()
    stages = {s: make_stage((s,), owner[s], tree.counts(s), prior.edge_alpha[s])
              for s in tree.situations}
    where = {s: s for s in tree.situations}
    total = [saturated_score(tree, prior)]
    for step in itertools.chain(result.forced, result.trace):
        a, b = stages[where[step.first[0]]], stages[where[step.second[0]]]
        if a.members != step.first or b.members != step.second:
            raise SelectionError(f"trace step {step} does not match the current staging")
        merged = merge_stages(a, b)
        delta = merged.score - a.score - b.score
        if abs(delta - step.delta) > tol:
            raise SelectionError(f"recorded delta {step.delta} != recomputed {delta}")
        del stages[where[a.members[0]]], stages[where[b.members[0]]]
        stages[merged.key] = merged
        for s in merged.members:
            where[s] = merged.key
        total.append(step.delta)
    return math.fsum(total)


__all__ = [
    "ACCEPT_THRESHOLD", "KEY_TIE_TOL", "OrderedHyperset", "SelectionError", "SelectionResult",
    "TraceStep", "ahc", "ahc_bound", "bound_curves", "count_bounds", "exact_map",
    "interval_partitions", "is_interval_partition", "mpc", "mpc_bound", "replay",
    "set_partitions", "total_order",
]
