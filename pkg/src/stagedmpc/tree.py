"""Event trees and hyperstages.

Node ids are canonical: breadth-first over the tree with children visited in
edge order, so the root is 0 and two builds of the same data are identical.
"""
from __future__ import annotations

import itertools
from collections import Counter, deque
from collections.abc import Sequence
from dataclasses import dataclass, field
from functools import cached_property
from typing import NamedTuple

from .data import Dataset


class TreeError(ValueError):
    """Malformed tree or hyperstage."""


class Edge(NamedTuple):
    label: str
    child: int
    count: int


@dataclass(frozen=True, eq=True)
class EventTree:
    """Rooted tree; ``edges`` maps each situation to its ordered out-edges.

    ``variables`` maps a situation to the name of the variable whose outcome
    it emits (``None`` when there is no such variable).  Leaves are the
    nodes without out-edges.
    """

    n_nodes: int
    edges: dict[int, tuple[Edge, ...]]
    variables: dict[int, str | None] = field(default_factory=dict)

    root = 0

    @cached_property
    def situations(self) -> tuple[int, ...]:
        return tuple(sorted(self.edges))

    @cached_property
    def leaves(self) -> tuple[int, ...]:
        return tuple(i for i in range(self.n_nodes) if i not in self.edges)

    @cached_property
    def parent(self) -> dict[int, tuple[int, int]]:
        """child -> (situation, edge index)"""
        out = {}
        for s, es in self.edges.items():
            for j, e in enumerate(es):
                out[e.child] = (s, j)
        return out

    def is_leaf(self, node: int) -> bool:
        return node not in self.edges

    def out_degree(self, s: int) -> int:
        return len(self.edges[s])

    def labels(self, s: int) -> tuple[str, ...]:
        return tuple(e.label for e in self.edges[s])

    def counts(self, s: int) -> tuple[int, ...]:
        return tuple(e.count for e in self.edges[s])

    def signature(self, s: int) -> tuple[int, tuple[str, ...]]:
        return (self.out_degree(s), self.labels(s))

    @property
    def total(self) -> int:
        if self.is_leaf(self.root):
            return 0
        return sum(self.counts(self.root))

    def incoming_count(self, node: int) -> int:
        if node == self.root:
            return self.total
        s, j = self.parent[node]
        return self.edges[s][j].count

    def path(self, node: int) -> tuple[str, ...]:
        labels = []
        while node != self.root:
            s, j = self.parent[node]
            labels.append(self.edges[s][j].label)
            node = s
        return tuple(reversed(labels))

    @cached_property
    def leaf_descendants(self) -> dict[int, tuple[int, ...]]:
        out: dict[int, tuple[int, ...]] = {}
        for node in reversed(range(self.n_nodes)):
            if self.is_leaf(node):
                out[node] = (node,)
            else:
                out[node] = tuple(itertools.chain.from_iterable(
                    out[e.child] for e in self.edges[node]))
        return out

    @property
    def is_binary(self) -> bool:
        """Every situation has at most two out-edges."""
        return all(len(es) <= 2 for es in self.edges.values())

    def check(self) -> None:
        """Raise :class:`TreeError` if a structural invariant fails."""
        seen = {self.root}
        for s, es in self.edges.items():
            if len({e.label for e in es}) != len(es):
                raise TreeError(f"situation {s} has duplicate edge labels")
            if not es:
                raise TreeError(f"situation {s} has no edges")
            for e in es:
                if e.child in seen or not 0 <= e.child < self.n_nodes:
                    raise TreeError(f"node {e.child} has in-degree > 1 or is out of range")
                if e.count < 0:
                    raise TreeError(f"negative count on edge {s}->{e.child}")
                seen.add(e.child)
        if len(seen) != self.n_nodes:
            raise TreeError("tree is not connected")
        for s, es in self.edges.items():
            if s != self.root and sum(e.count for e in es) != self.incoming_count(s):
                raise TreeError(f"flow conservation fails at situation {s}")

    def describe(self) -> str:
        return (f"EventTree({len(self.situations)} situations, {len(self.leaves)} leaves, "
                f"total {self.total})")


@dataclass
class SpecNode:
    """Nested, unnumbered tree description; ``edges`` holds (label, count, child)."""

    variable: str | None
    edges: list
    tag: object = None


@dataclass
class SpecLeaf:
    tag: object = None


def canonical_tree_tagged(spec: SpecNode | SpecLeaf | None) -> tuple[EventTree, dict[int, object]]:
    """Number a nested spec breadth-first; also return node id -> tag."""
    edges: dict[int, tuple[Edge, ...]] = {}
    variables: dict[int, str | None] = {}
    tags: dict[int, object] = {}
    queue = deque([(0, spec)])
    next_id = 1
    while queue:
        node, sp = queue.popleft()
        if sp is None or isinstance(sp, SpecLeaf):
            tags[node] = None if sp is None else sp.tag
            continue
        tags[node] = sp.tag
        built = []
        for label, count, child in sp.edges:
            built.append(Edge(label, next_id, int(count)))
            queue.append((next_id, child))
            next_id += 1
        edges[node] = tuple(built)
        variables[node] = sp.variable
    return EventTree(next_id, edges, variables), tags


def canonical_tree(spec: SpecNode | SpecLeaf | None) -> EventTree:
    return canonical_tree_tagged(spec)[0]


def to_spec(tree: EventTree, node: int = 0) -> SpecNode | SpecLeaf:
    """Nested spec of the subtree at ``node``, tagged with the original ids."""
    if tree.is_leaf(node):
        return SpecLeaf(node)
    return SpecNode(tree.variables.get(node),
                    [(e.label, e.count, to_spec(tree, e.child)) for e in tree.edges[node]],
                    node)


def build_event_tree(
    data: Dataset,
    order: Sequence[str] | None = None,
    prune_zeros: bool = False,
) -> EventTree:
    """Product event tree over ``order`` with prefix counts on the edges.

    Every category combination is a root-to-leaf path, including paths with
    zero count, unless ``prune_zeros`` drops zero-count edges and their
    subtrees.
    """
    order = list(data.names if order is None else order)
    if sorted(order) != sorted(data.names) or len(set(order)) != len(order):
        raise TreeError(f"order {order} is not a permutation of {list(data.names)}")
    cols = [data.names.index(v) for v in order]
    variables = [data.variable(v) for v in order]
    for v in variables:
        if not v.categories:
            raise TreeError(f"variable {v.name!r} has no categories; supply a schema")

    prefix_counts: Counter = Counter()
    for row, w in zip(data.rows, data.weights):
        key = tuple(row[c] for c in cols)
        for d in range(1, len(key) + 1):
            prefix_counts[key[:d]] += w
    if prune_zeros and data.total == 0:
        raise TreeError("cannot prune zero paths of an empty dataset")

    def spec(prefix: tuple[str, ...]) -> SpecNode | None:
        depth = len(prefix)
        if depth == len(variables):
            return None
        out = []
        for cat in variables[depth].categories:
            n = prefix_counts[prefix + (cat,)]
            if prune_zeros and n == 0:
                continue
            out.append((cat, n, spec(prefix + (cat,))))
        return SpecNode(variables[depth].name, out)

    return canonical_tree(spec(()))


@dataclass(frozen=True)
class Hyperstage:
    """Partition of situations into hypersets; ``names`` labels each hyperset."""

    hypersets: tuple[tuple[int, ...], ...]
    names: tuple[str, ...] = ()

    def __post_init__(self):
        if not self.names:
            object.__setattr__(self, "names", tuple(f"h{i}" for i in range(len(self.hypersets))))
        if len(self.names) != len(self.hypersets):
            raise TreeError("hyperstage names and hypersets differ in length")

    def __len__(self) -> int:
        return len(self.hypersets)

    def sizes(self) -> list[int]:
        return [len(h) for h in self.hypersets]

    def index_of(self) -> dict[int, int]:
        return {s: k for k, h in enumerate(self.hypersets) for s in h}


def variable_hyperstage(tree: EventTree, split_signatures: bool = False) -> Hyperstage:
    """One hyperset per variable, in order of first appearance.

    Situations of one variable with different out-degree or edge labels make
    the tree malformed for this hyperstage; with ``split_signatures`` they are
    instead separated into one hyperset per signature (needed for trees with
    pruned zero paths).
    """
    groups: dict[tuple, list[int]] = {}
    for s in tree.situations:
        var = tree.variables.get(s)
        if var is None:
            raise TreeError(f"situation {s} has no variable assignment")
        key = (var, tree.signature(s)) if split_signatures else (var,)
        groups.setdefault(key, []).append(s)
    names = []
    for key, members in groups.items():
        sigs = {tree.signature(s) for s in members}
        if len(sigs) > 1:
            raise TreeError(
                f"situations of variable {key[0]!r} have differing signatures: {sorted(sigs)}")
        if split_signatures and sum(1 for k in groups if k[0] == key[0]) > 1:
            names.append(f"{key[0]}[{','.join(key[1][1])}]")
        else:
            names.append(key[0])
    return Hyperstage(tuple(tuple(m) for m in groups.values()), tuple(names))


@dataclass(frozen=True)
class HyperstageReport:
    ok: bool
    message: str = ""
    nodes: tuple[int, ...] = ()

    def __bool__(self) -> bool:
        return self.ok


def validate_hyperstage(tree: EventTree, h: Hyperstage) -> HyperstageReport:
    """Check the partition property and per-hyperset signature homogeneity."""
    owner: dict[int, int] = {}
    sits = set(tree.situations)
    for k, hs in enumerate(h.hypersets):
        if not hs:
            return HyperstageReport(False, f"hyperset {k} is empty")
        for s in hs:
            if s not in sits:
                return HyperstageReport(False, f"node {s} is not a situation", (s,))
            if s in owner:
                return HyperstageReport(
                    False, f"situation {s} is in hypersets {owner[s]} and {k}", (s,))
            owner[s] = k
    missing = sits - owner.keys()
    if missing:
        m = min(missing)
        return HyperstageReport(False, f"situation {m} is in no hyperset", (m,))
    for hs in h.hypersets:
        first = hs[0]
        for s in hs[1:]:
            if tree.signature(s) != tree.signature(first):
                return HyperstageReport(
                    False,
                    f"situations {first} and {s} differ in signature: "
                    f"{tree.signature(first)} vs {tree.signature(s)}",
                    (first, s))
    return HyperstageReport(True)
