"""Conversational graph data model.

A conversational graph is directed, weighted and signed; every vertex carries
an attribute record (author, distance to the targeted vertex, target flag).
"""
from __future__ import annotations

import json
from collections import deque
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Mapping

INF = "INF"  # distance token for vertices unreachable from the targeted vertex


class GraphError(ValueError):
    pass


@dataclass(frozen=True)
class EdgeData:
    weight: int
    sign: int

    def __post_init__(self):
        if int(self.weight) != self.weight or self.weight < 1:
            raise GraphError(f"edge weight must be a positive integer, got {self.weight!r}")
        if self.sign not in (1, -1):
            raise GraphError(f"edge sign must be +1 or -1, got {self.sign!r}")


@dataclass(frozen=True)
class AttributeRecord:
    author: str
    distance: int | str  # non-negative int, or INF
    target: int


@dataclass(frozen=True)
class ConvGraph:
    """Immutable conversational graph.

    ``edges`` maps ordered pairs ``(u, v)`` to :class:`EdgeData`. Adjacency
    indexes are built once at construction.
    """

    id: str
    vertices: tuple[int, ...]
    attributes: Mapping[int, AttributeRecord]
    edges: Mapping[tuple[int, int], EdgeData]
    targeted_vertex: int
    _out: dict = field(init=False, repr=False, compare=False)
    _in: dict = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        vset = set(self.vertices)
        if len(vset) != len(self.vertices):
            raise GraphError("duplicate vertex ids")
        object.__setattr__(self, "vertices", tuple(sorted(vset)))
        if self.targeted_vertex not in vset:
            raise GraphError("targeted vertex not in graph")
        if set(self.attributes) != vset:
            raise GraphError("every vertex needs exactly one attribute record")
        for v, rec in self.attributes.items():
            if (rec.target == 1) != (v == self.targeted_vertex):
                raise GraphError(f"target flag of vertex {v} inconsistent with targeted vertex")
            if (rec.distance == 0) != (rec.target == 1):
                raise GraphError(f"distance of vertex {v} must be 0 iff it is the target")
        out: dict[int, list[tuple[int, EdgeData]]] = {v: [] for v in vset}
        inc: dict[int, list[tuple[int, EdgeData]]] = {v: [] for v in vset}
        for (u, v), e in self.edges.items():
            if u == v:
                raise GraphError(f"self-loop on vertex {u}")
            if u not in vset or v not in vset:
                raise GraphError(f"edge ({u}, {v}) has an endpoint outside the graph")
            if not isinstance(e, EdgeData):
                raise GraphError("edge payloads must be EdgeData")
            out[u].append((v, e))
            inc[v].append((u, e))
        for d in (out, inc):
            for lst in d.values():
                lst.sort(key=lambda item: item[0])
        object.__setattr__(self, "edges", dict(sorted(self.edges.items())))
        object.__setattr__(self, "_out", {k: tuple(v) for k, v in out.items()})
        object.__setattr__(self, "_in", {k: tuple(v) for k, v in inc.items()})

    @property
    def n(self) -> int:
        return len(self.vertices)

    def out_edges(self, u: int):
        return self._out[u]

    def in_edges(self, u: int):
        return self._in[u]

    def undirected_neighbors(self, u: int) -> list[int]:
        """Distinct neighbors of ``u`` ignoring direction."""
        return sorted({v for v, _ in self._out[u]} | {v for v, _ in self._in[u]})


def build_graph(
    graph_id: str,
    edges: Mapping[tuple[int, int], EdgeData | tuple[int, int]],
    targeted_vertex: int,
    authors: Mapping[int, str] | None = None,
    vertices: Iterable[int] | None = None,
) -> ConvGraph:
    """Assemble a graph and derive its distance/target attributes.

    ``edges`` values may be :class:`EdgeData` or ``(weight, sign)`` tuples.
    Authors default to the string form of the vertex id.
    """
    edge_map = {
        (int(u), int(v)): e if isinstance(e, EdgeData) else EdgeData(int(e[0]), int(e[1]))
        for (u, v), e in edges.items()
    }
    vset = set(vertices or ()) | {targeted_vertex}
    for u, v in edge_map:
        vset.update((u, v))
    authors = dict(authors or {})
    dist = _bfs_distances(vset, edge_map, targeted_vertex)
    attrs = {
        v: AttributeRecord(
            author=str(authors.get(v, v)),
            distance=dist.get(v, INF),
            target=int(v == targeted_vertex),
        )
        for v in vset
    }
    return ConvGraph(graph_id, tuple(vset), attrs, edge_map, targeted_vertex)


def neighbors(g: ConvGraph, u: int, mode: str = "out", sign_filter: str | int | None = None):
    """Incident edges of ``u`` as ``(other_vertex, EdgeData)`` in ascending vertex order.

    ``mode='all'`` merges the in and out lists, so a reciprocated pair shows
    up twice (once per directed edge).
    """
    if u not in g.attributes:
        raise GraphError("vertex not in graph")
    if mode == "out":
        items = list(g.out_edges(u))
    elif mode == "in":
        items = list(g.in_edges(u))
    elif mode == "all":
        items = sorted(g.out_edges(u) + g.in_edges(u), key=lambda item: item[0])
    else:
        raise ValueError(f"unknown mode {mode!r}; expected 'out', 'in' or 'all'")
    if sign_filter is not None:
        s = {"+": 1, "-": -1, 1: 1, -1: -1}[sign_filter]
        items = [it for it in items if it[1].sign == s]
    return items


def edge_quartiles(g: ConvGraph, u: int) -> dict[tuple[int, int], int]:
    """Quartile (1..4) of each outgoing edge weight of ``u``.

    Ties share the minimum rank, so equal weights get equal quartiles and the
    map only depends on the weight ordering.
    """
    out = neighbors(g, u, "out")
    n = len(out)
    if n == 0:
        return {}
    weights = sorted(e.weight for _, e in out)
    first_rank = {}
    for i, w in enumerate(weights, start=1):
        first_rank.setdefault(w, i)
    return {(u, v): min(4, 1 + (4 * (first_rank[e.weight] - 1)) // n) for v, e in out}


def _bfs_distances(vertices, edges, source) -> dict[int, int]:
    adj: dict[int, set[int]] = {v: set() for v in vertices}
    for u, v in edges:
        adj[u].add(v)
        adj[v].add(u)
    dist = {source: 0}
    queue = deque([source])
    while queue:
        u = queue.popleft()
        for w in sorted(adj[u]):
            if w not in dist:
                dist[w] = dist[u] + 1
                queue.append(w)
    return dist


def geodesic_distances(g: ConvGraph) -> dict[int, int | str]:
    """Undirected hop distance from the targeted vertex; unreachable -> ``INF``."""
    dist = _bfs_distances(g.vertices, g.edges, g.targeted_vertex)
    return {v: dist.get(v, INF) for v in g.vertices}


# -- serialization -----------------------------------------------------------

def graph_to_dict(g: ConvGraph) -> dict:
    return {
        "id": g.id,
        "targeted_vertex": g.targeted_vertex,
        "vertices": [
            {
                "id": v,
                "author": g.attributes[v].author,
                "distance": g.attributes[v].distance,
                "target": g.attributes[v].target,
            }
            for v in g.vertices
        ],
        "edges": [
            {"from": u, "to": v, "weight": e.weight, "sign": "+" if e.sign > 0 else "-"}
            for (u, v), e in g.edges.items()
        ],
    }


def graph_from_dict(d: dict) -> ConvGraph:
    try:
        attrs = {
            int(r["id"]): AttributeRecord(
                author=str(r["author"]),
                distance=r["distance"] if r["distance"] == INF else int(r["distance"]),
                target=int(r["target"]),
            )
            for r in d["vertices"]
        }
        edges = {}
        for r in d["edges"]:
            key = (int(r["from"]), int(r["to"]))
            if key in edges:
                raise GraphError(f"duplicate edge {key}")
            sign = {"+": 1, "-": -1}[r["sign"]]
            edges[key] = EdgeData(int(r["weight"]), sign)
        return ConvGraph(str(d["id"]), tuple(attrs), attrs, edges, int(d["targeted_vertex"]))
    except (KeyError, TypeError) as exc:
        raise GraphError(f"malformed graph document: {exc!r}") from exc


def save_graph(g: ConvGraph, path: str | Path) -> None:
    Path(path).write_text(json.dumps(graph_to_dict(g), indent=1, sort_keys=True) + "\n")


def load_graph(path: str | Path) -> ConvGraph:
    return graph_from_dict(json.loads(Path(path).read_text()))
