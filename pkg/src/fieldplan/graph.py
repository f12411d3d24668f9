"""Semantic map data structure: typed nodes and edges, path queries, diffs,
merges, and canonical text serialization.

Graphs are immutable values. Every operation returns a new graph; the
constructor checks all structural invariants, so an invalid graph cannot
exist at runtime.
"""

from __future__ import annotations

import json
import math
import re
from dataclasses import dataclass, replace
from functools import cached_property
from heapq import heappop, heappush
from typing import Iterable

from fieldplan.errors import GraphError, GraphParseError, NoPathError, UnknownNodeError

REGION = "region"
OBJECT = "object"
TRAVERSABILITY = "traversability"
CONTAINMENT = "containment"

NODE_KINDS = (REGION, OBJECT)
EDGE_KINDS = (TRAVERSABILITY, CONTAINMENT)

# Node ids: non-empty, lowercase alphanumerics plus underscore.
_ID_RE = re.compile(r"^[a-z0-9_]+$")

# Collisions closer than this merge into one node; farther apart, the
# incoming node is kept under a renamed id.
MERGE_COLLISION_RADIUS_M = 2.0


def valid_node_id(node_id: str) -> bool:
    return isinstance(node_id, str) and bool(_ID_RE.match(node_id))


def _round3(v: float) -> float:
    return round(float(v), 3)


@dataclass(frozen=True, order=True)
class Node:
    """A region (traversable place) or object (thing) on the map."""

    id: str
    kind: str
    cls: str
    x: float
    y: float
    desc: str = ""
    visible: bool = True

    def __post_init__(self):
        if not valid_node_id(self.id):
            raise GraphError(f"invalid node id {self.id!r}: must be non-empty [a-z0-9_]")
        if self.kind not in NODE_KINDS:
            raise GraphError(f"node '{self.id}': kind must be one of {NODE_KINDS}, got {self.kind!r}")
        if not self.cls:
            raise GraphError(f"node '{self.id}': class must be non-empty")
        if not (math.isfinite(self.x) and math.isfinite(self.y)):
            raise GraphError(f"node '{self.id}': position must be finite, got ({self.x}, {self.y})")
        # Positions are quantized to millimeters so serialization is canonical.
        object.__setattr__(self, "x", _round3(self.x))
        object.__setattr__(self, "y", _round3(self.y))

    @property
    def position(self) -> tuple[float, float]:
        return (self.x, self.y)

    def to_dict(self) -> dict:
        return {
            "id": self.id,
            "kind": self.kind,
            "class": self.cls,
            "x": self.x,
            "y": self.y,
            "desc": self.desc,
            "visible": self.visible,
        }

    @classmethod
    def from_dict(cls, d: dict) -> Node:
        try:
            return cls(
                id=d["id"],
                kind=d["kind"],
                cls=d["class"],
                x=float(d["x"]),
                y=float(d["y"]),
                desc=d.get("desc", ""),
                visible=bool(d.get("visible", True)),
            )
        except KeyError as exc:
            raise GraphError(f"node record missing field {exc.args[0]!r}") from exc


@dataclass(frozen=True, order=True)
class Edge:
    """Undirected edge; endpoints are stored in sorted order."""

    a: str
    b: str
    kind: str

    def __post_init__(self):
        if self.a == self.b:
            raise GraphError(f"self-loop edge on '{self.a}'")
        if self.kind not in EDGE_KINDS:
            raise GraphError(f"edge {self.a}--{self.b}: kind must be one of {EDGE_KINDS}, got {self.kind!r}")
        if self.a > self.b:
            a, b = self.b, self.a
            object.__setattr__(self, "a", a)
            object.__setattr__(self, "b", b)

    @property
    def pair(self) -> tuple[str, str]:
        return (self.a, self.b)

    def other(self, node_id: str) -> str:
        return self.b if node_id == self.a else self.a

    def to_dict(self) -> dict:
        return {"a": self.a, "b": self.b, "kind": self.kind}

    @classmethod
    def from_dict(cls, d: dict) -> Edge:
        try:
            return cls(a=d["a"], b=d["b"], kind=d["kind"])
        except KeyError as exc:
            raise GraphError(f"edge record missing field {exc.args[0]!r}") from exc


class SemanticGraph:
    """Immutable set of nodes and edges with checked invariants.

    Iteration order of nodes and edges is always sorted by id, so every
    read operation is deterministic.
    """

    __slots__ = ("_nodes", "_edges", "__dict__")

    def __init__(self, nodes: Iterable[Node] = (), edges: Iterable[Edge] = ()):
        by_id: dict[str, Node] = {}
        for n in nodes:
            if n.id in by_id:
                raise GraphError(f"duplicate node id '{n.id}'")
            by_id[n.id] = n
        edge_set: dict[tuple[str, str], Edge] = {}
        for e in edges:
            if e.pair in edge_set:
                raise GraphError(f"duplicate edge {e.a}--{e.b}")
            for end in e.pair:
                if end not in by_id:
                    raise UnknownNodeError(end, f"edge {e.a}--{e.b}")
            kinds = {by_id[e.a].kind, by_id[e.b].kind}
            if e.kind == TRAVERSABILITY and kinds != {REGION}:
                raise GraphError(f"traversability edge {e.a}--{e.b} must connect region to region")
            if e.kind == CONTAINMENT and kinds != {REGION, OBJECT}:
                raise GraphError(f"containment edge {e.a}--{e.b} must connect region to object")
            edge_set[e.pair] = e
        self._nodes: dict[str, Node] = dict(sorted(by_id.items()))
        self._edges: dict[tuple[str, str], Edge] = dict(sorted(edge_set.items()))

    # -- accessors ---------------------------------------------------------

    @property
    def nodes(self) -> tuple[Node, ...]:
        return tuple(self._nodes.values())

    @property
    def edges(self) -> tuple[Edge, ...]:
        return tuple(self._edges.values())

    def node_ids(self) -> tuple[str, ...]:
        return tuple(self._nodes)

    def __contains__(self, node_id: str) -> bool:
        return node_id in self._nodes

    def __len__(self) -> int:
        return len(self._nodes)

    def node(self, node_id: str) -> Node:
        try:
            return self._nodes[node_id]
        except KeyError:
            raise UnknownNodeError(node_id) from None

    def has_edge(self, a: str, b: str) -> bool:
        return (min(a, b), max(a, b)) in self._edges

    def __eq__(self, other) -> bool:
        if not isinstance(other, SemanticGraph):
            return NotImplemented
        return self._nodes == other._nodes and self._edges == other._edges

    def __hash__(self):
        return hash((tuple(self._nodes.items()), tuple(self._edges)))

    def __repr__(self):
        return f"SemanticGraph({len(self._nodes)} nodes, {len(self._edges)} edges)"

    @cached_property
    def _adjacency(self) -> dict[str, tuple[str, ...]]:
        """Traversability neighbors per region, sorted for determinism."""
        adj: dict[str, list[str]] = {nid: [] for nid in self._nodes}
        for e in self._edges.values():
            if e.kind == TRAVERSABILITY:
                adj[e.a].append(e.b)
                adj[e.b].append(e.a)
        return {nid: tuple(sorted(ns)) for nid, ns in adj.items()}

    @cached_property
    def _containers(self) -> dict[str, tuple[str, ...]]:
        """Regions each object is contained in, sorted."""
        cont: dict[str, list[str]] = {}
        for e in self._edges.values():
            if e.kind == CONTAINMENT:
                na, nb = self._nodes[e.a], self._nodes[e.b]
                obj, reg = (na, nb) if na.kind == OBJECT else (nb, na)
                cont.setdefault(obj.id, []).append(reg.id)
        return {oid: tuple(sorted(rs)) for oid, rs in cont.items()}

    def regions_of(self, node_id: str) -> tuple[str, ...]:
        """The node itself if a region, else its containing regions."""
        n = self.node(node_id)
        if n.kind == REGION:
            return (node_id,)
        return self._containers.get(node_id, ())


def euclidean(a: tuple[float, float], b: tuple[float, float]) -> float:
    return math.hypot(a[0] - b[0], a[1] - b[1])


def reachable(graph: SemanticGraph, frm: str, to: str) -> bool:
    """True iff a traversability path connects the two nodes.

    Objects are reachable through their containing regions; a node is
    always reachable from itself.
    """
    if frm not in graph:
        raise UnknownNodeError(frm)
    if to not in graph:
        raise UnknownNodeError(to)
    if frm == to:
        return True
    sources = set(graph.regions_of(frm))
    targets = set(graph.regions_of(to))
    if not sources or not targets:
        return False
    if sources & targets:
        return True
    adj = graph._adjacency
    seen = set(sources)
    frontier = list(sources)
    while frontier:
        nxt = []
        for nid in frontier:
            for nb in adj[nid]:
                if nb in targets:
                    return True
                if nb not in seen:
                    seen.add(nb)
                    nxt.append(nb)
        frontier = nxt
    return False


def shortest_path(graph: SemanticGraph, frm: str, to: str) -> tuple[list[str], float]:
    """Minimum-length node path between two nodes.

    Edge weights are Euclidean distances between node positions; an object
    endpoint attaches to its containing regions at the distance between the
    object and region positions. Ties are broken by the lexicographically
    smallest id sequence. Raises NoPathError when unreachable.
    """
    if frm not in graph:
        raise UnknownNodeError(frm)
    if to not in graph:
        raise UnknownNodeError(to)
    if frm == to:
        return [frm], 0.0

    adj = graph._adjacency
    pos = {n.id: n.position for n in graph.nodes}
    obj_goal = graph.node(to).kind == OBJECT
    # For an object goal, the final hop enters it from a containing region.
    tails = {reg: euclidean(pos[reg], pos[to]) for reg in graph.regions_of(to)} if obj_goal else {}

    heap: list[tuple[float, tuple[str, ...]]] = []
    if graph.node(frm).kind == REGION:
        heappush(heap, (0.0, (frm,)))
    else:
        for reg in graph.regions_of(frm):
            heappush(heap, (euclidean(pos[frm], pos[reg]), (frm, reg)))

    # Heap pops are nondecreasing in (cost, path), so the first state that
    # ends at the goal is minimal in cost with the smallest id sequence.
    best: dict[str, float] = {}
    while heap:
        cost, path = heappop(heap)
        cur = path[-1]
        if cur == to:
            return list(path), cost
        if cur in best and cost > best[cur] + 1e-12:
            continue
        best.setdefault(cur, cost)
        for nb in adj[cur]:
            if nb in path:
                continue
            heappush(heap, (cost + euclidean(pos[cur], pos[nb]), path + (nb,)))
        if obj_goal and cur in tails:
            heappush(heap, (cost + tails[cur], path + (to,)))
    raise NoPathError(frm, to)


@dataclass(frozen=True)
class GraphDiff:
    """Structured difference between two graphs.

    `changed_nodes` holds the updated versions of nodes whose content
    (class, position, description, visibility) changed.
    """

    added_nodes: tuple[Node, ...] = ()
    removed_nodes: tuple[str, ...] = ()
    changed_nodes: tuple[Node, ...] = ()
    added_edges: tuple[Edge, ...] = ()
    removed_edges: tuple[Edge, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "added_nodes", tuple(sorted(self.added_nodes)))
        object.__setattr__(self, "removed_nodes", tuple(sorted(self.removed_nodes)))
        object.__setattr__(self, "changed_nodes", tuple(sorted(self.changed_nodes)))
        object.__setattr__(self, "added_edges", tuple(sorted(self.added_edges)))
        object.__setattr__(self, "removed_edges", tuple(sorted(self.removed_edges)))
        added = {n.id for n in self.added_nodes}
        removed = set(self.removed_nodes)
        changed = {n.id for n in self.changed_nodes}
        overlap = (added & removed) | (added & changed) | (removed & changed)
        if overlap:
            raise GraphError(f"diff lists nodes in multiple roles: {sorted(overlap)}")
        if {e.pair for e in self.added_edges} & {e.pair for e in self.removed_edges}:
            raise GraphError("diff lists edges as both added and removed")

    def is_empty(self) -> bool:
        return not (
            self.added_nodes
            or self.removed_nodes
            or self.changed_nodes
            or self.added_edges
            or self.removed_edges
        )

    def to_dict(self) -> dict:
        return {
            "added_nodes": [n.to_dict() for n in self.added_nodes],
            "removed_nodes": list(self.removed_nodes),
            "changed_nodes": [n.to_dict() for n in self.changed_nodes],
            "added_edges": [e.to_dict() for e in self.added_edges],
            "removed_edges": [e.to_dict() for e in self.removed_edges],
        }

    @classmethod
    def from_dict(cls, d: dict) -> GraphDiff:
        return cls(
            added_nodes=tuple(Node.from_dict(n) for n in d.get("added_nodes", [])),
            removed_nodes=tuple(d.get("removed_nodes", [])),
            changed_nodes=tuple(Node.from_dict(n) for n in d.get("changed_nodes", [])),
            added_edges=tuple(Edge.from_dict(e) for e in d.get("added_edges", [])),
            removed_edges=tuple(Edge.from_dict(e) for e in d.get("removed_edges", [])),
        )


def graph_diff(base: SemanticGraph, updated: SemanticGraph) -> GraphDiff:
    """Difference such that apply_diff(base, diff) == updated."""
    base_nodes = {n.id: n for n in base.nodes}
    new_nodes = {n.id: n for n in updated.nodes}
    added = [n for nid, n in new_nodes.items() if nid not in base_nodes]
    removed = [nid for nid in base_nodes if nid not in new_nodes]
    changed = [n for nid, n in new_nodes.items() if nid in base_nodes and base_nodes[nid] != n]
    base_edges = {e.pair: e for e in base.edges}
    new_edges = {e.pair: e for e in updated.edges}
    added_e = [e for p, e in new_edges.items() if p not in base_edges or base_edges[p] != e]
    removed_e = [e for p, e in base_edges.items() if p not in new_edges or new_edges[p] != e]
    return GraphDiff(
        added_nodes=tuple(added),
        removed_nodes=tuple(removed),
        changed_nodes=tuple(changed),
        added_edges=tuple(added_e),
        removed_edges=tuple(removed_e),
    )


def apply_diff(base: SemanticGraph, d: GraphDiff) -> SemanticGraph:
    """Apply a diff; removals must exist and additions must not collide."""
    nodes = {n.id: n for n in base.nodes}
    edges = {e.pair: e for e in base.edges}
    for nid in d.removed_nodes:
        if nid not in nodes:
            raise UnknownNodeError(nid, "diff removes missing node")
        del nodes[nid]
    for e in d.removed_edges:
        if e.pair not in edges:
            raise GraphError(f"diff removes missing edge {e.a}--{e.b}")
        del edges[e.pair]
    for n in d.changed_nodes:
        if n.id not in nodes:
            raise UnknownNodeError(n.id, "diff changes missing node")
        nodes[n.id] = n
    for n in d.added_nodes:
        if n.id in nodes:
            raise GraphError(f"diff adds colliding node id '{n.id}'")
        nodes[n.id] = n
    for e in d.added_edges:
        if e.pair in edges:
            raise GraphError(f"diff adds colliding edge {e.a}--{e.b}")
        edges[e.pair] = e
    return SemanticGraph(nodes.values(), edges.values())


def merge(base: SemanticGraph, incoming: SemanticGraph, source_tag: str) -> SemanticGraph:
    """Union two maps by node id; total, never raises.

    Id collisions within MERGE_COLLISION_RADIUS_M are treated as the same
    physical node (incoming description wins, visibility is combined);
    farther apart, the incoming node is kept under `<id>__<source_tag>` and
    its edges follow the rename.
    """
    tag = re.sub(r"[^a-z0-9_]", "_", source_tag.lower()) or "merged"
    nodes = {n.id: n for n in base.nodes}
    rename: dict[str, str] = {}
    for n in incoming.nodes:
        if n.id not in nodes:
            nodes[n.id] = n
            continue
        ours = nodes[n.id]
        if euclidean(ours.position, n.position) <= MERGE_COLLISION_RADIUS_M:
            nodes[n.id] = replace(ours, desc=n.desc, visible=ours.visible or n.visible)
        else:
            new_id = f"{n.id}__{tag}"
            while new_id in nodes:
                new_id += "_2"
            rename[n.id] = new_id
            nodes[new_id] = replace(n, id=new_id)
    edges = {e.pair: e for e in base.edges}
    for e in incoming.edges:
        a = rename.get(e.a, e.a)
        b = rename.get(e.b, e.b)
        ne = Edge(a=a, b=b, kind=e.kind)
        edges.setdefault(ne.pair, ne)
    return SemanticGraph(nodes.values(), edges.values())


# -- text rendering and canonical serialization ---------------------------


def _fmt(v: float) -> str:
    return f"{v:.3f}"


def render_diff_text(d: GraphDiff) -> str:
    """One line per change, sorted by the id of the changed element."""
    lines: list[tuple[str, int, str]] = []
    for n in d.added_nodes:
        lines.append((n.id, 0, f"ADDED node {n.id} ({n.cls}) at ({_fmt(n.x)}, {_fmt(n.y)})"))
    for nid in d.removed_nodes:
        lines.append((nid, 0, f"REMOVED node {nid}"))
    for n in d.changed_nodes:
        text = f"CHANGED node {n.id} ({n.cls}) at ({_fmt(n.x)}, {_fmt(n.y)})"
        if n.desc:
            text += f": {n.desc}"
        lines.append((n.id, 0, text))
    for e in d.added_edges:
        lines.append((e.a, 1, f"ADDED edge {e.a} -- {e.b}"))
    for e in d.removed_edges:
        lines.append((e.a, 1, f"REMOVED edge {e.a} -- {e.b}"))
    lines.sort()
    return "\n".join(text for _, _, text in lines)


def serialize_graph(graph: SemanticGraph) -> str:
    """Canonical single-line text form: sorted keys, sorted elements,
    coordinates with exactly three decimals. Byte-stable across platforms.
    """
    node_parts = []
    for n in graph.nodes:
        node_parts.append(
            "{"
            + f'"class":{json.dumps(n.cls, ensure_ascii=False)},'
            + f'"desc":{json.dumps(n.desc, ensure_ascii=False)},'
            + f'"id":{json.dumps(n.id)},'
            + f'"kind":{json.dumps(n.kind)},'
            + f'"visible":{"true" if n.visible else "false"},'
            + f'"x":{_fmt(n.x)},'
            + f'"y":{_fmt(n.y)}'
            + "}"
        )
    edge_parts = []
    for e in graph.edges:
        edge_parts.append(
            "{" + f'"a":{json.dumps(e.a)},"b":{json.dumps(e.b)},"kind":{json.dumps(e.kind)}' + "}"
        )
    return '{"edges":[' + ",".join(edge_parts) + '],"nodes":[' + ",".join(node_parts) + "]}"


def parse_graph(text: str) -> SemanticGraph:
    """Inverse of serialize_graph; also accepts any equivalent JSON object."""
    try:
        obj = json.loads(text)
    except json.JSONDecodeError as exc:
        raise GraphParseError(exc.msg, exc.lineno, exc.colno) from exc
    if not isinstance(obj, dict):
        raise GraphParseError("graph text must be a JSON object")
    try:
        nodes = [Node.from_dict(n) for n in obj.get("nodes", [])]
        edges = [Edge.from_dict(e) for e in obj.get("edges", [])]
        return SemanticGraph(nodes, edges)
    except GraphError as exc:
        raise GraphParseError(str(exc)) from exc
