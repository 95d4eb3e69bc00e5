import json
import random

import pytest
from hypothesis import given
from hypothesis import strategies as st

from abusegraph.graph import EdgeData, build_graph
from abusegraph.wl import (VARIANTS, AttributeScheme, LabelDictionary, LabelState, build_document,
                           build_documents, finalize_sb, initial_labels, label_states,
                           read_documents, wl_step_plain, write_documents)

from conftest import graphs, relabel

SCHEMES = [AttributeScheme.parse(s) for s in ("degree", "distance", "target", "distance+target")]


def doc(g, variant, scheme=AttributeScheme(), d=None, T=2):
    return build_document(g, variant, scheme, T, d)


def same_doc(g, h, variant, scheme=AttributeScheme(), T=2):
    """Label multisets compared through one shared dictionary."""
    d = LabelDictionary()
    return sorted(doc(g, variant, scheme, d, T).labels) == sorted(doc(h, variant, scheme, d, T).labels)


class TestScheme:
    def test_parse(self):
        assert AttributeScheme.parse("Distance + target").composites == ("distance", "target")
        assert str(AttributeScheme.parse("degree")) == "degree"

    @pytest.mark.parametrize("bad", ["", "degree+degree", "colour"])
    def test_invalid(self, bad):
        with pytest.raises(ValueError):
            AttributeScheme.parse(bad)


class TestInitialLabels:
    fig = build_graph("f", {(1, 0): (1, 1), (0, 2): (1, 1), (3, 0): (2, 1),
                            (4, 1): (1, 1), (3, 5): (1, -1)}, 0)

    def parts(self, scheme, variant="wda_n"):
        d = LabelDictionary()
        st_ = initial_labels(self.fig, AttributeScheme.parse(scheme), variant, d)
        return {u: json.loads(d.string(i)[1:]) for u, i in st_.pos.items()}

    def test_target_scheme(self):
        assert self.parts("target") == {0: ["1"], 1: ["0"], 2: ["0"], 3: ["0"], 4: ["0"], 5: ["0"]}

    def test_distance_scheme(self):
        assert [self.parts("distance")[v][0] for v in range(6)] == ["0", "1", "1", "1", "2", "2"]

    def test_sb_degrees(self):
        g = build_graph("s", {(0, 1): (1, 1), (2, 0): (1, 1), (0, 3): (1, -1)}, 0)
        d = LabelDictionary()
        s = initial_labels(g, AttributeScheme(), "wda_sb", d)
        assert d.string(s.pos[0]) == 'i+["2"]' and d.string(s.neg[0]) == 'i-["1"]'

    def test_unknown_variant(self):
        with pytest.raises(ValueError):
            initial_labels(self.fig, AttributeScheme(), "fancy", LabelDictionary())


class TestPlain:
    def test_path_endpoints(self):
        g = build_graph("p", {(0, 1): (1, 1), (1, 2): (1, 1)}, 0)
        d = LabelDictionary()
        s1 = wl_step_plain(g, initial_labels(g, AttributeScheme(), "plain", d), d)
        assert s1.pos[0] == s1.pos[2] != s1.pos[1]

    def test_isolated_vertex_stable(self):
        g = build_graph("i", {}, 0, vertices=[1])
        states = label_states(g, "plain", AttributeScheme(), 3, LabelDictionary())
        parts = [{u: s.pos[u] for u in g.vertices} for s in states]
        # vertices 0 and 1 stay in one class at every depth
        assert all(p[0] == p[1] for p in parts)

    def test_isomorphic_triangles(self):
        t1 = build_graph("a", {(0, 1): (1, 1), (1, 2): (1, 1), (2, 0): (1, 1)}, 0)
        t2 = build_graph("b", {(5, 7): (1, 1), (7, 9): (1, 1), (9, 5): (1, 1)}, 5)
        assert same_doc(t1, t2, "plain")

    def test_document_length(self):
        g = build_graph("p", {(i, i + 1): (1, 1) for i in range(5)}, 0)
        assert len(doc(g, "plain").labels) == 18

    def test_zero_iterations(self):
        with pytest.raises(ValueError, match="at least one iteration required"):
            doc(build_graph("x", {}, 0), "plain", T=0)


class TestWdaNeighborhoods:
    def test_sign_flip_changes_label(self):
        e = {(0, 1): (1, 1), (0, 2): (2, 1), (2, 1): (1, 1)}
        g1 = build_graph("a", e, 0)
        g2 = build_graph("a", {**e, (0, 2): (2, -1)}, 0)
        d = LabelDictionary()
        s1 = label_states(g1, "wda_n", AttributeScheme(), 1, d)[1]
        s2 = label_states(g2, "wda_n", AttributeScheme(), 1, d)[1]
        assert s1.pos[0] != s2.pos[0]

    def test_quartile_prefixes(self):
        g = build_graph("q", {(0, 1): (1, 1), (0, 2): (9, 1)}, 0)
        d = LabelDictionary()
        s1 = label_states(g, "wda_n", AttributeScheme.parse("target"), 1, d)[1]
        items = d.string(s1.pos[0]).split("|")[1].split(";")
        assert sorted(i[:2] for i in items) == ["1+", "3+"]

    @given(graphs())
    def test_uniform_weights_match_plain_on_out_view(self, g):
        # all weights equal and signs positive: wda_n refines like plain WL on out-neighbors
        flat = build_graph(g.id, {k: (1, 1) for k in g.edges}, g.targeted_vertex,
                           vertices=g.vertices)
        d = LabelDictionary()
        s = label_states(flat, "wda_n", AttributeScheme.parse("target"), 2, d)[2]
        ref = {}
        for u in flat.vertices:
            ref[u] = str(flat.attributes[u].target)
        for _ in range(2):
            ref = {u: ref[u] + "|" + ";".join(sorted(ref[v] for v, _ in flat.out_edges(u)))
                   for u in flat.vertices}
        for u in flat.vertices:
            for v in flat.vertices:
                assert (s.pos[u] == s.pos[v]) == (ref[u] == ref[v])


class TestDualChannel:
    def test_negative_edge_crosses_channels(self):
        g = build_graph("n", {(0, 1): (3, -1)}, 0)
        d = LabelDictionary()
        s0, s1 = label_states(g, "wda_sb", AttributeScheme(), 1, d)
        assert d.string(s1.pos[0]) == f"{s0.pos[0]}||1:{s0.neg[1]}"
        assert d.string(s1.neg[0]) == f"{s0.neg[0]}||1:{s0.pos[1]}"

    def test_all_positive_minus_collection_empty(self):
        g = build_graph("p", {(0, 1): (1, 1), (1, 2): (1, 1)}, 0)
        d = LabelDictionary()
        s0, s1 = label_states(g, "wda_sb", AttributeScheme(), 1, d)
        assert d.string(s1.neg[0]) == f"{s0.neg[0]}|1:{s0.neg[1]}|"

    def test_balanced_vs_unbalanced_triangle(self):
        tri = {(0, 1): (1, 1), (1, 2): (1, 1), (2, 0): (1, 1)}
        unb = {**tri, (2, 0): (1, -1)}
        for variant in ("sg2v_sb", "wda_sb"):
            assert not same_doc(build_graph("a", tri, 0), build_graph("a", unb, 0), variant)

    def test_finalize(self):
        d = LabelDictionary()
        a = finalize_sb(LabelState(1, {0: 1, 1: 2}, {0: 2, 1: 1}), d)
        b = finalize_sb(LabelState(1, {5: 1}, {5: 2}), d)
        assert a[0] != a[1] and a[0] == b[5]

    def test_document_sizes(self):
        g = build_graph("n", {(0, 1): (3, -1)}, 0)
        assert len(doc(g, "wda_sb", T=2).labels) == 2 * 3
        assert len(build_document(g, "wda_sb", AttributeScheme(), 2, None, True).labels) == 2 * 3 * 3


@pytest.mark.parametrize("variant", VARIANTS)
@given(g=graphs(), seed=st.integers(0, 10**6))
def test_permutation_invariance(variant, g, seed):
    ids = list(g.vertices)
    shuffled = ids[:]
    random.Random(seed).shuffle(shuffled)
    h = relabel(g, dict(zip(ids, [100 + v for v in shuffled])))
    for scheme in SCHEMES[:2]:
        assert same_doc(g, h, variant, scheme)


def test_documents_roundtrip(tmp_path):
    gs = [build_graph(f"g{i}", {(0, 1): (i + 1, 1)}, 0) for i in range(3)]
    docs, _ = build_documents(gs, "wda_n")
    write_documents(docs, tmp_path / "d.txt")
    assert read_documents(tmp_path / "d.txt") == docs
