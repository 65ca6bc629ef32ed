"""Chain event graphs and serialisation (DOT for display, JSON for interchange)."""
from __future__ import annotations

import colorsys
import json
from collections.abc import Sequence
from dataclasses import dataclass
from typing import NamedTuple

import jsonschema

from .scoring import PriorSpec, Staging, prior_from_path_mass
from .selection import SelectionResult, TraceStep
from .tree import Edge, EventTree, Hyperstage

FORMAT_NAME = "stagedmpc-result"
FORMAT_VERSION = 1

DEFAULT_PALETTE = (
    "#e41a1c", "#377eb8", "#4daf4a", "#984ea3", "#ff7f00", "#ffff33",
    "#a65628", "#f781bf", "#66c2a5", "#fc8d62", "#8da0cb", "#e78ac3",
)


class SchemaError(ValueError):
    pass


class CEGEdge(NamedTuple):
    source: int
    target: int
    label: str
    count: int


@dataclass(frozen=True)
class CEG:
    """Positions are numbered by their smallest situation; the sink is last."""

    n_positions: int
    edges: tuple[CEGEdge, ...]
    position_of: dict[int, int]
    stage_of: dict[int, int]

    root = 0

    @property
    def sink(self) -> int:
        return self.n_positions - 1

    def out_edges(self, pos: int) -> list[CEGEdge]:
        return [e for e in self.edges if e.source == pos]

    def in_edges(self, pos: int) -> list[CEGEdge]:
        return [e for e in self.edges if e.target == pos]

    def members(self, pos: int) -> list[int]:
        return sorted(s for s, p in self.position_of.items() if p == pos)


def to_ceg(tree: EventTree, staging: Staging) -> CEG:
    """Merge situations with identical futures; all leaves become the sink.

    Two situations share a position when they are in the same stage and
    their edges lead, label by label, to the same positions.
    """
    SINK = ("sink",)
    provisional: dict[int, object] = {}
    for node in reversed(range(tree.n_nodes)):
        if tree.is_leaf(node):
            provisional[node] = SINK
        else:
            provisional[node] = (staging.stage_of(node),
                                 tuple((e.label, provisional[e.child]) for e in tree.edges[node]))
    numbering: dict[object, int] = {}
    for s in tree.situations:
        numbering.setdefault(provisional[s], len(numbering))
    sink = len(numbering)
    numbering[SINK] = sink
    position_of = {node: numbering[key] for node, key in provisional.items()}

    rep: dict[int, list[int]] = {}
    for s in tree.situations:
        rep.setdefault(position_of[s], []).append(s)
    edges = []
    for pos in range(sink):
        members = rep[pos]
        first = tree.edges[members[0]]
        for j, e in enumerate(first):
            count = sum(tree.edges[s][j].count for s in members)
            edges.append(CEGEdge(pos, position_of[e.child], e.label, count))
    stage_of = {pos: staging.stage_of(members[0]) for pos, members in rep.items()}
    return CEG(sink + 1, tuple(edges), position_of, stage_of)


def recompact(ceg: CEG) -> CEG:
    """Merge CEG positions with the same stage and outgoing (label, target) edges."""
    key_of: dict[int, object] = {ceg.sink: ("sink",)}

    def key(pos: int):
        if pos not in key_of:
            key_of[pos] = (ceg.stage_of[pos],
                           tuple((e.label, key(e.target)) for e in ceg.out_edges(pos)))
        return key_of[pos]

    for pos in range(ceg.sink):
        key(pos)
    numbering: dict[object, int] = {}
    for pos in range(ceg.sink):
        numbering.setdefault(key_of[pos], len(numbering))
    sink = len(numbering)
    numbering[("sink",)] = sink
    remap = {pos: numbering[key_of[pos]] for pos in range(ceg.n_positions)}
    merged: dict[tuple[int, int, str], int] = {}
    slots: dict[int, list[tuple[int, str]]] = {}
    for e in ceg.edges:
        src = remap[e.source]
        k = (src, remap[e.target], e.label)
        if k not in merged:
            slots.setdefault(src, []).append((remap[e.target], e.label))
        merged[k] = merged.get(k, 0) + e.count
    edges = tuple(CEGEdge(src, t, lab, merged[(src, t, lab)])
                  for src in range(sink) for t, lab in slots[src])
    return CEG(sink + 1, edges, {n: remap[p] for n, p in ceg.position_of.items()},
               {remap[p]: st for p, st in ceg.stage_of.items()})


def ceg_paths(ceg: CEG) -> dict[tuple[str, ...], int]:
    """Root-to-sink label sequences (with multiplicity)."""
    out: dict[tuple[str, ...], int] = {}

    def walk(pos, labels):
        if pos == ceg.sink:
            out[labels] = out.get(labels, 0) + 1
            return
        for e in ceg.out_edges(pos):
            walk(e.target, labels + (e.label,))

    walk(ceg.root, ())
    return out


def palette_colours(k: int, palette: Sequence[str] | None = None) -> list[str]:
    palette = list(palette or DEFAULT_PALETTE)
    colours = palette[:k]
    extra = k - len(colours)
    for i in range(extra):
        r, g, b = colorsys.hsv_to_rgb(i / extra, 0.45, 0.95)
        colours.append(f"#{int(r * 255):02x}{int(g * 255):02x}{int(b * 255):02x}")
    if len(set(colours)) != len(colours):
        raise ValueError("palette colours are not distinct")
    return colours


def _escape(text: str) -> str:
    return str(text).replace("\\", "\\\\").replace('"', '\\"')


def _quote(text: str) -> str:
    return f'"{_escape(text)}"'


def _edge_label(label: str, count: int) -> str:
    return f'"{_escape(label)}\\n{count}"'


def export_dot(obj: EventTree | CEG, staging: Staging | None = None,
               palette: Sequence[str] | None = None, name: str = "G") -> str:
    """DOT digraph of an event tree, a staged tree (tree plus staging) or a CEG.

    Situations in a stage with two or more members share a fill colour;
    singleton stages are left unfilled.  Edge labels carry the outcome and
    its count.  CEG positions are labelled ``w<i>``, the sink ``w_inf``.
    """
    lines = [f"digraph {_quote(name)} {{", "  rankdir=LR;",
             "  node [shape=circle, fontsize=10];"]
    if isinstance(obj, CEG):
        groups: dict[int, list[int]] = {}
        for pos, st in obj.stage_of.items():
            groups.setdefault(st, []).append(pos)
        shared = sorted(st for st, ps in groups.items() if len(ps) > 1)
        colour = dict(zip(shared, palette_colours(len(shared), palette)))
        for pos in range(obj.n_positions):
            label = "w_inf" if pos == obj.sink else f"w{pos}"
            attrs = [f"label={_quote(label)}"]
            st = obj.stage_of.get(pos)
            if st in colour:
                attrs += ["style=filled", f"fillcolor={_quote(colour[st])}"]
            lines.append(f"  w{pos} [{', '.join(attrs)}];")
        for e in obj.edges:
            lines.append(f"  w{e.source} -> w{e.target} [label={_edge_label(e.label, e.count)}];")
    else:
        tree = obj
        colour = {}
        if staging is not None:
            shared = [k for k, st in enumerate(staging.stages) if len(st.members) > 1]
            colour = dict(zip(shared, palette_colours(len(shared), palette)))
        for node in range(tree.n_nodes):
            attrs = [f"label={_quote(f's{node}' if not tree.is_leaf(node) else f'l{node}')}"]
            if tree.is_leaf(node):
                attrs.append("shape=point")
            elif staging is not None and staging.stage_of(node) in colour:
                attrs += ["style=filled", f"fillcolor={_quote(colour[staging.stage_of(node)])}"]
            lines.append(f"  n{node} [{', '.join(attrs)}];")
        for s in tree.situations:
            for e in tree.edges[s]:
                lines.append(f"  n{s} -> n{e.child} [label={_edge_label(e.label, e.count)}];")
    lines.append("}")
    return "\n".join(lines) + "\n"


_STEP = {
    "type": "object",
    "required": ["first", "second", "delta", "hyperset"],
    "properties": {
        "first": {"type": "array", "items": {"type": "integer"}, "minItems": 1},
        "second": {"type": "array", "items": {"type": "integer"}, "minItems": 1},
        "delta": {"type": "number"},
        "hyperset": {"type": "integer", "minimum": 0},
    },
}

SCHEMA = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "type": "object",
    "required": ["format", "version", "tree", "prior"],
    "properties": {
        "format": {"const": FORMAT_NAME},
        "version": {"const": FORMAT_VERSION},
        "tree": {
            "type": "object",
            "required": ["n_nodes", "situations"],
            "properties": {
                "n_nodes": {"type": "integer", "minimum": 1},
                "situations": {
                    "type": "array",
                    "items": {
                        "type": "object",
                        "required": ["id", "variable", "edges"],
                        "properties": {
                            "id": {"type": "integer", "minimum": 0},
                            "variable": {"type": ["string", "null"]},
                            "edges": {
                                "type": "array", "minItems": 1,
                                "items": {
                                    "type": "object",
                                    "required": ["label", "child", "count"],
                                    "properties": {
                                        "label": {"type": "string"},
                                        "child": {"type": "integer", "minimum": 1},
                                        "count": {"type": "integer", "minimum": 0},
                                    },
                                },
                            },
                        },
                    },
                },
            },
        },
        "prior": {
            "type": "object",
            "required": ["alpha_total", "path_mass"],
            "properties": {
                "alpha_total": {"type": "number", "exclusiveMinimum": 0},
                "path_mass": {
                    "type": "array",
                    "items": {"type": "array", "prefixItems": [
                        {"type": "integer"}, {"type": "number", "exclusiveMinimum": 0}],
                        "minItems": 2, "maxItems": 2},
                },
            },
        },
        "hyperstage": {
            "type": "array",
            "items": {"type": "object", "required": ["name", "situations"],
                      "properties": {"name": {"type": "string"},
                                     "situations": {"type": "array",
                                                    "items": {"type": "integer"}}}},
        },
        "result": {
            "type": ["object", "null"],
            "required": ["engine", "log_score", "saturated_score", "stages", "trace",
                         "forced", "counters"],
            "properties": {
                "engine": {"type": "string"},
                "log_score": {"type": "number"},
                "saturated_score": {"type": "number"},
                "stages": {"type": "array", "items": {"type": "array",
                                                      "items": {"type": "integer"}}},
                "trace": {"type": "array", "items": _STEP},
                "forced": {"type": "array", "items": _STEP},
                "counters": {
                    "type": "object",
                    "required": ["evaluated", "scored", "accepted"],
                    "properties": {
                        "evaluated": {"type": "array", "items": {"type": "integer"}},
                        "scored": {"type": "integer"},
                        "accepted": {"type": "integer"},
                    },
                },
                "elapsed": {"type": "number"},
            },
        },
    },
}


def _step_doc(step: TraceStep) -> dict:
    return {"first": list(step.first), "second": list(step.second),
            "delta": step.delta, "hyperset": step.hyperset}


def document(tree: EventTree, prior: PriorSpec, result: SelectionResult | None = None,
             hyperstage: Hyperstage | None = None, include_elapsed: bool = True) -> dict:
    if hyperstage is None and result is not None:
        hyperstage = result.staging.hyperstage
    doc = {
        "format": FORMAT_NAME,
        "version": FORMAT_VERSION,
        "tree": {
            "n_nodes": tree.n_nodes,
            "situations": [
                {"id": s, "variable": tree.variables.get(s),
                 "edges": [{"label": e.label, "child": e.child, "count": e.count}
                           for e in tree.edges[s]]}
                for s in tree.situations
            ],
        },
        "prior": {
            "alpha_total": prior.alpha_total,
            "path_mass": [[leaf, prior.path_mass[leaf]] for leaf in tree.leaves],
        },
    }
    if hyperstage is not None:
        doc["hyperstage"] = [{"name": n, "situations": list(hs)}
                             for n, hs in zip(hyperstage.names, hyperstage.hypersets)]
    if result is not None:
        res = {
            "engine": result.engine,
            "log_score": result.log_score,
            "saturated_score": result.saturated_score,
            "stages": [list(b) for b in result.staging.blocks],
            "trace": [_step_doc(s) for s in result.trace],
            "forced": [_step_doc(s) for s in result.forced],
            "counters": {"evaluated": list(result.evaluated), "scored": result.scored,
                         "accepted": result.accepted},
            "orders": None if result.orders is None else [list(o) for o in result.orders],
            "ordering_edge": result.ordering_edge,
            "options": dict(result.options),
        }
        if include_elapsed:
            res["elapsed"] = result.elapsed
        doc["result"] = res
    return doc


def export_json(result: SelectionResult | None, tree: EventTree, prior: PriorSpec,
                hyperstage: Hyperstage | None = None, include_elapsed: bool = True) -> str:
    """Serialise tree, prior, hyperstage and (optionally) a result as JSON text."""
    doc = document(tree, prior, result, hyperstage, include_elapsed)
    return json.dumps(doc, indent=2, ensure_ascii=False) + "\n"


def _validate(doc) -> None:
    validator = jsonschema.Draft202012Validator(SCHEMA)
    errors = sorted(validator.iter_errors(doc), key=lambda e: list(e.absolute_path))
    if errors:
        err = errors[0]
        raise SchemaError(f"{err.json_path}: {err.message}")


def _tree_from_doc(doc: dict) -> EventTree:
    edges = {}
    variables = {}
    for i, sit in enumerate(doc["situations"]):
        sid = sit["id"]
        if sid in edges:
            raise SchemaError(f"$.tree.situations[{i}].id: duplicate situation {sid}")
        edges[sid] = tuple(Edge(e["label"], e["child"], e["count"]) for e in sit["edges"])
        variables[sid] = sit["variable"]
    tree = EventTree(doc["n_nodes"], edges, variables)
    try:
        tree.check()
    except ValueError as exc:
        raise SchemaError(f"$.tree: {exc}") from None
    return tree


def import_json(text: str) -> tuple[EventTree, PriorSpec, SelectionResult | None]:
    """Parse :func:`export_json` output; the staging is rebuilt from the stored stages."""
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise SchemaError(f"$: invalid JSON ({exc})") from None
    _validate(doc)
    tree = _tree_from_doc(doc["tree"])
    masses = {int(leaf): float(m) for leaf, m in doc["prior"]["path_mass"]}
    if set(masses) != set(tree.leaves):
        raise SchemaError("$.prior.path_mass: leaves do not match the tree")
    prior = prior_from_path_mass(tree, masses, doc["prior"]["alpha_total"])
    hyperstage = None
    if "hyperstage" in doc:
        hyperstage = Hyperstage(tuple(tuple(h["situations"]) for h in doc["hyperstage"]),
                                tuple(h["name"] for h in doc["hyperstage"]))
    res = doc.get("result")
    if res is None:
        return tree, prior, None
    if hyperstage is None:
        raise SchemaError("$.hyperstage: required when a result is present")
    staging = Staging(tree, prior, hyperstage, res["stages"])

    def steps(key):
        return [TraceStep(tuple(s["first"]), tuple(s["second"]), s["delta"], s["hyperset"])
                for s in res[key]]

    result = SelectionResult(
        engine=res["engine"], staging=staging, log_score=res["log_score"],
        saturated_score=res["saturated_score"], trace=steps("trace"), forced=steps("forced"),
        evaluated=list(res["counters"]["evaluated"]), scored=res["counters"]["scored"],
        elapsed=res.get("elapsed", 0.0),
        orders=None if res.get("orders") is None else [tuple(o) for o in res["orders"]],
        ordering_edge=res.get("ordering_edge"), options=dict(res.get("options") or {}))
    return tree, prior, result


def import_document(text: str) -> tuple[EventTree, PriorSpec, Hyperstage | None,
                                         SelectionResult | None]:
    tree, prior, result = import_json(text)
    doc = json.loads(text)
    hyperstage = None
    if "hyperstage" in doc:
        hyperstage = Hyperstage(tuple(tuple(h["situations"]) for h in doc["hyperstage"]),
                                tuple(h["name"] for h in doc["hyperstage"]))
    return tree, prior, hyperstage, result
