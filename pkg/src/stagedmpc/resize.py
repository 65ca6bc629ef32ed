"""Binary resize of event trees and its inverse.

A floret with k > 2 edges becomes a chain of k - 1 binary florets: each one
splits the next outcome (in policy order) from a residual edge leading to the
florets for the remaining outcomes.  Root-to-leaf paths, and therefore
leaf-path priors, carry over unchanged.
"""
from __future__ import annotations

from collections.abc import Mapping, Sequence
from dataclasses import dataclass

from .scoring import PriorSpec, prior_from_path_mass
from .tree import EventTree, SpecLeaf, SpecNode, TreeError, canonical_tree_tagged

RESIDUAL_PREFIX = "Other"


def residual_label(rest: Sequence[str]) -> str:
    return f"{RESIDUAL_PREFIX}({','.join(rest)})"


def derived_name(variable: str | None, level: int) -> str | None:
    if variable is None:
        return None
    return variable + "-rest" * level


@dataclass(frozen=True)
class ResizeMap:
    source: EventTree
    target: EventTree
    leaf_map: dict[int, int]
    provenance: dict[int, tuple[int, int]]
    split_order: dict[int, tuple[str, ...]]
    residual: frozenset[tuple[int, int]]

    @property
    def is_identity(self) -> bool:
        return self.source == self.target

    def outcome_path(self, leaf: int) -> tuple[str, ...]:
        """Labels of a target leaf path with residual edges dropped."""
        labels = []
        node = leaf
        tree = self.target
        while node != tree.root:
            s, j = tree.parent[node]
            if (s, j) not in self.residual:
                labels.append(tree.edges[s][j].label)
            node = s
        return tuple(reversed(labels))

    def situation_images(self, s: int) -> list[int]:
        """Target situations derived from source situation ``s``, in split order."""
        return sorted((t for t, (src, _) in self.provenance.items() if src == s),
                      key=lambda t: self.provenance[t][1])


def default_policy(tree: EventTree) -> dict[str | None, tuple[str, ...]]:
    """Per variable: outcome labels in order of first appearance over its florets."""
    policy: dict[str | None, dict[str, None]] = {}
    for s in tree.situations:
        seen = policy.setdefault(tree.variables.get(s), {})
        for label in tree.labels(s):
            seen.setdefault(label)
    return {var: tuple(labels) for var, labels in policy.items()}


def binary_resize(
    tree: EventTree,
    policy: Mapping[str, Sequence[str]] | None = None,
) -> tuple[EventTree, ResizeMap]:
    """Resize every floret with more than two edges into a chain of binary florets.

    ``policy`` maps a variable to the order in which its outcomes are split
    off; variables without an entry use :func:`default_policy`.  Derived
    florets are named ``var``, ``var-rest``, ``var-rest-rest``... by the policy
    position of the outcome they split off.
    """
    order = default_policy(tree)
    for var, labels in (policy or {}).items():
        order[var] = tuple(labels)

    def build(node: int) -> SpecNode | SpecLeaf:
        if tree.is_leaf(node):
            return SpecLeaf(("leaf", node))
        var = tree.variables.get(node)
        edges = tree.edges[node]
        if len(edges) <= 2:
            return SpecNode(var, [(e.label, e.count, build(e.child)) for e in edges],
                            ("sit", node, 0, ()))
        by_label = {e.label: e for e in edges}
        full = order.get(var, ())
        missing = [lab for lab in by_label if lab not in full]
        if missing:
            raise TreeError(f"split order for {var!r} does not cover outcomes {missing}")
        ranked = [lab for lab in full if lab in by_label]

        def chain(step: int) -> SpecNode:
            rest = ranked[step:]
            head = by_label[rest[0]]
            name = derived_name(var, full.index(rest[0]))
            tag = ("sit", node, step, tuple(ranked))
            if len(rest) == 2:
                tail = by_label[rest[1]]
                return SpecNode(name, [(head.label, head.count, build(head.child)),
                                       (tail.label, tail.count, build(tail.child))], tag)
            rest_count = sum(by_label[lab].count for lab in rest[1:])
            return SpecNode(name, [(head.label, head.count, build(head.child)),
                                   (residual_label(rest[1:]), rest_count, chain(step + 1))], tag)

        return chain(0)

    target, tags = canonical_tree_tagged(build(tree.root))
    leaf_map, provenance, split_order = {}, {}, {}
    residual = set()
    for node, tag in tags.items():
        if tag[0] == "leaf":
            leaf_map[tag[1]] = node
        else:
            _, src, step, ranked = tag
            provenance[node] = (src, step)
            split_order[src] = ranked or tree.labels(src)
            k = len(ranked)
            if ranked and step < k - 2:
                residual.add((node, 1))
    rmap = ResizeMap(tree, target, leaf_map, provenance, split_order, frozenset(residual))
    return target, rmap


def transport_prior(prior: PriorSpec, rmap: ResizeMap) -> PriorSpec:
    """Carry leaf-path masses across the leaf bijection of ``rmap``."""
    if set(prior.path_mass) != set(rmap.leaf_map):
        raise TreeError("prior is not defined on the source tree of this resize map")
    mass = {rmap.leaf_map[leaf]: m for leaf, m in prior.path_mass.items()}
    return prior_from_path_mass(rmap.target, mass, prior.alpha_total)


def contract(tree: EventTree, rmap: ResizeMap) -> EventTree:
    """Undo :func:`binary_resize`: contract each chain back into one floret.

    Counts are taken from ``tree``, which must have the shape of
    ``rmap.target``.
    """
    if tree.n_nodes != rmap.target.n_nodes or set(tree.situations) != set(rmap.provenance):
        raise TreeError("tree does not match the resize map")
    source = rmap.source

    def build(node: int) -> SpecNode | SpecLeaf:
        if tree.is_leaf(node):
            return SpecLeaf(node)
        src, step = rmap.provenance[node]
        if step != 0:
            raise TreeError(f"node {node} is inside a chain but reached as a chain head")
        collected: dict[str, tuple[int, int]] = {}
        current, expect = node, 0
        while True:
            if rmap.provenance.get(current) != (src, expect):
                raise TreeError(f"broken chain at node {current} for situation {src}")
            for j, e in enumerate(tree.edges[current]):
                if (current, j) in rmap.residual:
                    nxt = e.child
                else:
                    collected[e.label] = (e.count, e.child)
            if (current, 1) in rmap.residual:
                current, expect = nxt, expect + 1
            else:
                break
        labels = source.labels(src)
        if set(collected) != set(labels):
            raise TreeError(f"chain for situation {src} has outcomes {sorted(collected)}")
        return SpecNode(source.variables.get(src),
                        [(lab, collected[lab][0], build(collected[lab][1])) for lab in labels],
                        src)

    out, tags = canonical_tree_tagged(build(tree.root))
    for node, tag in tags.items():
        if not out.is_leaf(node) and tag != node:
            raise TreeError("contracted tree does not reproduce the source numbering")
    return out
