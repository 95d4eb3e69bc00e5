"""Weisfeiler--Lehman relabeling of conversational graphs.

Variants
--------
``plain``
    Graph2vec relabeling on the undirected simple view; ignores weights,
    signs and directions.
``sg2v_n`` / ``sg2v_sb``
    Signed relabeling on the direction-blind view (a vertex pair is negative
    if either directed edge between them is negative); no weight information.
``wda_n`` / ``wda_sb``
    Weighted/directed/attributed relabeling: out-neighborhoods, each neighbor
    prefixed by the quartile of the edge weight and (for ``wda_n``) its sign.

The ``*_sb`` variants keep a positive and a negative label per vertex and
cross channels along negative edges.
"""
from __future__ import annotations

import json
from collections import Counter
from dataclasses import dataclass
from typing import Iterable, Sequence

from .graph import ConvGraph, edge_quartiles

BASES = ("degree", "author", "distance", "target")
VARIANTS = ("plain", "sg2v_n", "wda_n", "sg2v_sb", "wda_sb")
SINGLE_CHANNEL = ("plain", "sg2v_n", "wda_n")


@dataclass(frozen=True)
class AttributeScheme:
    composites: tuple[str, ...] = ("degree",)

    def __post_init__(self):
        if not self.composites:
            raise ValueError("attribute scheme needs at least one base attribute")
        if len(set(self.composites)) != len(self.composites):
            raise ValueError("duplicate base attribute in scheme")
        bad = [b for b in self.composites if b not in BASES]
        if bad:
            raise ValueError(f"unknown base attribute(s) {bad}; valid: {BASES}")

    @classmethod
    def parse(cls, text: str) -> "AttributeScheme":
        """``'degree'``, ``'distance+target'``, ..."""
        return cls(tuple(part.strip().lower() for part in text.split("+") if part.strip()))

    def __str__(self):
        return "+".join(self.composites)


class LabelDictionary:
    """Injective map from canonical label strings to dense integer ids."""

    def __init__(self):
        self._ids: dict[str, int] = {}
        self._strings: list[str] = []

    def __call__(self, key: str) -> int:
        idx = self._ids.get(key)
        if idx is None:
            idx = self._ids[key] = len(self._strings)
            self._strings.append(key)
        return idx

    def __len__(self):
        return len(self._strings)

    def __contains__(self, key: str):
        return key in self._ids

    def string(self, idx: int) -> str:
        return self._strings[idx]


@dataclass
class LabelState:
    """Labels of every vertex at one iteration (``neg`` only for dual-channel variants)."""

    t: int
    pos: dict[int, int]
    neg: dict[int, int] | None = None

    @property
    def dual(self) -> bool:
        return self.neg is not None


@dataclass(frozen=True)
class GraphDocument:
    graph_id: str
    labels: tuple[int, ...]

    def counts(self) -> Counter:
        return Counter(self.labels)


# -- neighborhoods -------------------------------------------------------------

def _signed_view(g: ConvGraph, u: int) -> list[tuple[int, int]]:
    """Direction-blind signed neighbors ``(v, sign)``, one per adjacent vertex."""
    signs: dict[int, int] = {}
    for v, e in g.out_edges(u) + g.in_edges(u):
        signs[v] = min(signs.get(v, 1), e.sign)
    return sorted(signs.items())


def _neighborhood(g: ConvGraph, u: int, variant: str, quartiles) -> list[tuple[int, int, int]]:
    """``(v, sign, quartile)`` triples used by the signed variants."""
    if variant.startswith("wda"):
        q = quartiles[u]
        return [(v, e.sign, q[u, v]) for v, e in g.out_edges(u)]
    return [(v, s, 0) for v, s in _signed_view(g, u)]


def _quartile_table(g: ConvGraph) -> dict[int, dict]:
    return {u: edge_quartiles(g, u) for u in g.vertices}


# -- initial labels ----------------------------------------------------------

def _degree(g: ConvGraph, u: int, variant: str) -> str:
    if variant == "plain":
        return str(len(g.undirected_neighbors(u)))
    if variant == "sg2v_n":
        return str(len(_signed_view(g, u)))
    return str(len(g.out_edges(u)) + len(g.in_edges(u)))


def _signed_degrees(g: ConvGraph, u: int, variant: str) -> tuple[int, int]:
    if variant == "sg2v_sb":
        signs = [s for _, s in _signed_view(g, u)]
    else:
        signs = [e.sign for _, e in g.out_edges(u) + g.in_edges(u)]
    return sum(s > 0 for s in signs), sum(s < 0 for s in signs)


def _attribute_parts(g: ConvGraph, u: int, scheme: AttributeScheme, degree: str) -> list[str]:
    rec = g.attributes[u]
    values = {
        "degree": degree,
        "author": rec.author,
        "distance": str(rec.distance),
        "target": str(rec.target),
    }
    return [values[b] for b in scheme.composites]


def initial_labels(g: ConvGraph, scheme: AttributeScheme, variant: str,
                   dictionary: LabelDictionary) -> LabelState:
    if variant not in VARIANTS:
        raise ValueError(f"unknown variant {variant!r}; valid: {VARIANTS}")
    if variant in SINGLE_CHANNEL:
        pos = {
            u: dictionary("i" + json.dumps(_attribute_parts(g, u, scheme, _degree(g, u, variant))))
            for u in g.vertices
        }
        return LabelState(0, pos)
    pos, neg = {}, {}
    for u in g.vertices:
        dp, dn = _signed_degrees(g, u, variant)
        pos[u] = dictionary("i+" + json.dumps(_attribute_parts(g, u, scheme, str(dp))))
        neg[u] = dictionary("i-" + json.dumps(_attribute_parts(g, u, scheme, str(dn))))
    return LabelState(0, pos, neg)


# -- relabeling steps ----------------------------------------------------------

def _join(items: Iterable[str]) -> str:
    return ";".join(sorted(items))


def wl_step_plain(g: ConvGraph, state: LabelState, dictionary: LabelDictionary) -> LabelState:
    prev = state.pos
    new = {
        u: dictionary(f"{prev[u]}|{_join(str(prev[v]) for v in g.undirected_neighbors(u))}")
        for u in g.vertices
    }
    return LabelState(state.t + 1, new)


def wl_step_signed(g: ConvGraph, state: LabelState, dictionary: LabelDictionary,
                   variant: str = "wda_n", quartiles=None) -> LabelState:
    """Single-channel signed step; ``wda_n`` prefixes each neighbor with ``q`` and sign."""
    if quartiles is None and variant.startswith("wda"):
        quartiles = _quartile_table(g)
    prev = state.pos
    new = {}
    for u in g.vertices:
        items = (
            f"{q}{'+' if s > 0 else '-'}{prev[v]}"
            for v, s, q in _neighborhood(g, u, variant, quartiles)
        )
        new[u] = dictionary(f"{prev[u]}|{_join(items)}")
    return LabelState(state.t + 1, new)


def wl_step_wda_n(g: ConvGraph, state: LabelState, dictionary: LabelDictionary,
                  quartiles=None) -> LabelState:
    return wl_step_signed(g, state, dictionary, "wda_n", quartiles)


def wl_step_sb(g: ConvGraph, state: LabelState, dictionary: LabelDictionary,
               variant: str = "wda_sb", quartiles=None) -> LabelState:
    """Dual-channel step; negative edges cross the positive and negative channels."""
    if not state.dual:
        raise ValueError("dual-channel step needs a dual label state")
    if quartiles is None and variant.startswith("wda"):
        quartiles = _quartile_table(g)
    lp, ln = state.pos, state.neg
    new_pos, new_neg = {}, {}
    for u in g.vertices:
        nb = _neighborhood(g, u, variant, quartiles)
        plus = [(v, q) for v, s, q in nb if s > 0]
        minus = [(v, q) for v, s, q in nb if s < 0]
        new_pos[u] = dictionary(
            f"{lp[u]}|{_join(f'{q}:{lp[v]}' for v, q in plus)}|{_join(f'{q}:{ln[v]}' for v, q in minus)}"
        )
        new_neg[u] = dictionary(
            f"{ln[u]}|{_join(f'{q}:{ln[v]}' for v, q in plus)}|{_join(f'{q}:{lp[v]}' for v, q in minus)}"
        )
    return LabelState(state.t + 1, new_pos, new_neg)


def wl_step_wda_sb(g: ConvGraph, state: LabelState, dictionary: LabelDictionary,
                   quartiles=None) -> LabelState:
    return wl_step_sb(g, state, dictionary, "wda_sb", quartiles)


def finalize_sb(state: LabelState, dictionary: LabelDictionary) -> dict[int, int]:
    """Fuse each vertex's (positive, negative) label pair into one label."""
    return {u: dictionary(f"sb({state.pos[u]},{state.neg[u]})") for u in state.pos}


# -- documents ---------------------------------------------------------------

def label_states(g: ConvGraph, variant: str, scheme: AttributeScheme, iterations: int,
                 dictionary: LabelDictionary) -> list[LabelState]:
    if iterations < 1:
        raise ValueError("at least one iteration required")
    state = initial_labels(g, scheme, variant, dictionary)
    states = [state]
    quartiles = _quartile_table(g) if variant.startswith("wda") else None
    for _ in range(iterations):
        if variant == "plain":
            state = wl_step_plain(g, state, dictionary)
        elif variant in SINGLE_CHANNEL:
            state = wl_step_signed(g, state, dictionary, variant, quartiles)
        else:
            state = wl_step_sb(g, state, dictionary, variant, quartiles)
        states.append(state)
    return states


def build_document(g: ConvGraph, variant: str = "wda_n",
                   scheme: AttributeScheme = AttributeScheme(), iterations: int = 2,
                   dictionary: LabelDictionary | None = None,
                   sb_channels: bool = False) -> GraphDocument:
    """Collect the labels of every vertex at every iteration ``0..iterations``.

    Dual-channel variants contribute the fused label per iteration; with
    ``sb_channels`` the raw channel labels are appended as well.
    """
    dictionary = dictionary if dictionary is not None else LabelDictionary()
    labels: list[int] = []
    for state in label_states(g, variant, scheme, iterations, dictionary):
        if state.dual:
            fused = finalize_sb(state, dictionary)
            labels.extend(fused[u] for u in g.vertices)
            if sb_channels:
                labels.extend(state.pos[u] for u in g.vertices)
                labels.extend(state.neg[u] for u in g.vertices)
        else:
            labels.extend(state.pos[u] for u in g.vertices)
    return GraphDocument(g.id, tuple(labels))


def build_documents(graphs: Sequence[ConvGraph], variant: str = "wda_n",
                    scheme: AttributeScheme = AttributeScheme(), iterations: int = 2,
                    sb_channels: bool = False) -> tuple[list[GraphDocument], LabelDictionary]:
    dictionary = LabelDictionary()
    docs = [build_document(g, variant, scheme, iterations, dictionary, sb_channels) for g in graphs]
    return docs, dictionary


def write_documents(docs: Iterable[GraphDocument], path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for d in docs:
            fh.write(" ".join([d.graph_id, *map(str, d.labels)]) + "\n")


def read_documents(path) -> list[GraphDocument]:
    docs = []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            parts = line.split()
            if parts:
                docs.append(GraphDocument(parts[0], tuple(int(x) for x in parts[1:])))
    return docs
