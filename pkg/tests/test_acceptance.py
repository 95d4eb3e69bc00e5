"""Acceptance checks, one test per criterion, each reporting a PASS/FAIL line."""
import itertools
import random
import time

import networkx as nx
import numpy as np
import pytest

from abusegraph.embeddings import (TrainConfig, embed_corpus, spectral_features, train_pvdbow,
                                   train_pvdbow_full)
from abusegraph.evaluation import FoldPlan, confusion, fusion_evaluate, kfold_evaluate, macro_scores
from abusegraph.features import Category, capture_analysis, categorize, graph_best_features
from abusegraph.graph import build_graph
from abusegraph.ingest import (ABUSIVE, ExtractionConfig, SynthConfig, extract_graph,
                               generate_synthetic_corpus, score_sentiment)
from abusegraph.wl import VARIANTS, AttributeScheme, LabelDictionary, build_document, build_documents
from abusegraph.wsgcn import (MasterScheme, WsgcnConfig, WsgcnModel, attach_master_nodes, forward,
                              loss_and_grads, normalized_in_weights, prepare)

import conftest
from conftest import random_conversation, random_graph, relabel
from test_ingest import brute_force_edges
from test_wsgcn import SIX

SCHEMES = [AttributeScheme.parse(s) for s in ("degree", "distance", "target", "distance+target")]


def report(n, ok, detail):
    line = f"[{'PASS' if ok else 'FAIL'}] criterion {n}: {detail}"
    conftest.ACCEPTANCE_LINES.append(line)
    print(line)
    assert ok, line


def same_docs(g, h, variant, scheme):
    d = LabelDictionary()
    a = build_document(g, variant, scheme, dictionary=d)
    b = build_document(h, variant, scheme, dictionary=d)
    return sorted(a.labels) == sorted(b.labels)


def test_1_wl_permutation_invariance():
    t0 = time.perf_counter()
    bad = 0
    for seed in range(50):
        r = random.Random(seed)
        g = random_graph(r, r.randint(2, 12), r.choice((0.15, 0.3, 0.5)), gid=f"g{seed}")
        ids = list(g.vertices)
        perm = dict(zip(ids, r.sample(ids, len(ids))))
        h = relabel(g, perm)
        bad += sum(not same_docs(g, h, v, s) for v in VARIANTS for s in SCHEMES)
    secs = time.perf_counter() - t0
    report(1, bad == 0 and secs < 60, f"{bad} mismatching documents over 50 graphs x "
           f"{len(VARIANTS)} variants x {len(SCHEMES)} schemes in {secs:.1f}s")


def test_2_attribute_sensitivity():
    base = {(0, 1): (2, 1), (1, 2): (1, 1), (2, 0): (3, 1), (3, 0): (1, 1)}
    g = build_graph("g", base, 0)
    flipped = build_graph("f", {**base, (1, 2): (1, -1)}, 0)
    sign = (not same_docs(g, flipped, "wda_n", AttributeScheme())
            and not same_docs(g, flipped, "wda_sb", AttributeScheme())
            and same_docs(g, flipped, "plain", AttributeScheme()))

    out_star = build_graph("o", {(0, i): (1, 1) for i in range(1, 4)}, 0)
    in_star = build_graph("i", {(i, 0): (1, 1) for i in range(1, 4)}, 0)
    direction = not same_docs(out_star, in_star, "wda_n", AttributeScheme())

    monotone = True
    for seed in range(30):
        g = random_graph(random.Random(seed), 9, 0.4)
        cubed = build_graph("c", {k: (e.weight ** 3 + 1, e.sign) for k, e in g.edges.items()},
                            g.targeted_vertex, vertices=g.vertices,
                            authors={v: g.attributes[v].author for v in g.vertices})
        monotone &= all(same_docs(g, cubed, v, s) for v in ("wda_n", "wda_sb") for s in SCHEMES)
    report(2, sign and direction and monotone,
           f"sign flip {sign}, direction reversal {direction}, w^3+1 invariance {monotone}")


def test_3_extraction_oracle():
    bad = 0
    for seed in range(30):
        r = random.Random(1000 + seed)
        c = random_conversation(r, r.randint(1, 20), r.randint(1, 6), cid=f"c{seed}")
        cfg = ExtractionConfig(window_size=r.randint(2, 10))
        g = extract_graph(c, cfg)
        got = {k: (e.weight, e.sign) for k, e in g.edges.items()}
        bad += got != brute_force_edges(c.messages, cfg.window_size, score_sentiment)
    report(3, bad == 0, f"{bad}/30 conversations differ from the window enumeration")


def test_4_spectral_oracle():
    k2 = spectral_features(build_graph("k2", {(0, 1): (1, 1)}, 0), 6)
    c4 = spectral_features(build_graph("c4", {(i, (i + 1) % 4): (1, 1) for i in range(4)}, 0), 3)
    err = 0.0
    for seed in range(20):
        r = random.Random(seed)
        g = random_graph(r, r.randint(2, 12), 0.3)
        U = nx.Graph()
        U.add_nodes_from(g.vertices)
        U.add_edges_from(g.edges)
        ev = np.linalg.eigvalsh(nx.normalized_laplacian_matrix(U, nodelist=list(g.vertices)).toarray())
        ref = np.zeros(g.n)
        pos = ev[ev > 1e-9]
        ref[: len(pos)] = pos
        err = max(err, np.abs(spectral_features(g, g.n) - ref).max())
    ok = np.allclose(k2, [2, 0, 0, 0, 0, 0]) and np.allclose(c4, [1, 1, 2]) and err < 1e-6
    report(4, ok, f"K2 {np.round(k2, 6).tolist()}, C4 {np.round(c4, 6).tolist()}, "
           f"max random-graph error {err:.1e}")


@pytest.fixture(scope="module")
def default_corpus():
    convs = generate_synthetic_corpus(SynthConfig.scaled(600, seed=42))
    graphs = [extract_graph(c) for c in convs]
    y = np.array([c.label == ABUSIVE for c in convs], dtype=int)
    return graphs, y


def test_5_trainer_health(default_corpus):
    graphs, _ = default_corpus
    docs, _ = build_documents(graphs, "wda_n")
    cfg = TrainConfig(seed=42)
    losses = train_pvdbow_full(docs, cfg).epoch_losses
    drop = 1 - losses[19] / losses[0]
    same = np.array_equal(train_pvdbow(docs, cfg).vectors, train_pvdbow(docs, cfg).vectors)
    report(5, drop >= 0.30 and same, f"loss {losses[0]:.4f} -> {losses[19]:.4f} "
           f"(drop {100 * drop:.1f}%), repeat run bit-identical {same}")


def test_6_wsgcn_numerics():
    worst_sum = 0.0
    for seed in range(30):
        g = random_graph(random.Random(seed), 8, 0.4)
        for u in g.vertices:
            for s in (1, -1):
                w = normalized_in_weights(g, u, s)
                if w:
                    worst_sum = max(worst_sum, abs(sum(w.values()) - 1))

    m = WsgcnModel.init(MasterScheme.PLUS_MINUS, WsgcnConfig(seed=1))
    T = prepare([SIX], MasterScheme.PLUS_MINUS)[0]
    _, grads = loss_and_grads(T, m.params)
    rel = 0.0
    for name, P in m.params.items():
        num = np.zeros_like(P)
        for idx in np.ndindex(P.shape):
            old = P[idx]
            P[idx] = old + 1e-6
            lp = loss_and_grads(T, m.params, False)[0]
            P[idx] = old - 1e-6
            lm = loss_and_grads(T, m.params, False)[0]
            P[idx] = old
            num[idx] = (lp - lm) / 2e-6
        rel = max(rel, np.linalg.norm(num - grads[name])
                  / max(np.linalg.norm(num) + np.linalg.norm(grads[name]), 1e-30))

    equi = 0.0
    for seed in range(20):
        r = random.Random(seed)
        g = random_graph(r, r.randint(2, 8), 0.35)
        ids = list(g.vertices)
        perm = dict(zip(ids, r.sample(ids, len(ids))))
        h = relabel(g, perm)
        Zg, rg = forward(attach_master_nodes(g, MasterScheme.PLUS_MINUS), m)
        Zh, rh = forward(attach_master_nodes(h, MasterScheme.PLUS_MINUS), m)
        rows = [sorted(h.vertices).index(perm[v]) for v in g.vertices]
        equi = max(equi, np.abs(rg - rh).max(), np.abs(Zg[:g.n] - Zh[rows]).max())
    ok = worst_sum <= 1e-9 and rel < 1e-4 and equi <= 1e-10
    report(6, ok, f"weight-sum error {worst_sum:.1e}, gradient relative error {rel:.1e}, "
           f"equivariance error {equi:.1e}")


def test_7_directional_table4(default_corpus):
    t0 = time.perf_counter()
    graphs, y = default_corpus
    plan = FoldPlan(seed=42)
    f = {}
    for method in ("g2v", "sg2v_sb", "wda_sg2v_sb"):
        emb = embed_corpus(graphs, method, "degree", TrainConfig(seed=42))
        f[method] = kfold_evaluate(emb.vectors, y, plan).macro_f
    secs = time.perf_counter() - t0
    wda, sg2v, g2v = f["wda_sg2v_sb"], f["sg2v_sb"], f["g2v"]
    ok = wda >= sg2v >= g2v and wda >= 90.0 and wda - g2v >= 2.0 and secs < 600
    report(7, ok, f"WDA-SG2V {wda:.2f} >= SG2V {sg2v:.2f} >= Graph2vec {g2v:.2f}, "
           f"gap {wda - g2v:.2f}, {secs:.0f}s")


def split_modality_corpus(seed, n=600, d=16, shift=8.0):
    """Modality A separates the first half of the abusive class, B the second half."""
    r = np.random.default_rng(seed)
    y = np.zeros(n, dtype=int)
    y[: n // 3] = 1
    A, B = r.normal(size=(n, d)), r.normal(size=(n, d))
    A[: n // 6, 0] += shift
    B[n // 6: n // 3, 0] += shift
    return A, B, y


def test_8_directional_table5():
    rows = []
    for seed in range(42, 47):
        A, B, y = split_modality_corpus(seed)
        plan = FoldPlan(seed=seed)
        ra, rb = kfold_evaluate(A, y, plan), kfold_evaluate(B, y, plan)
        fused = {s: fusion_evaluate(A, B, y, s, plan, reports=(ra, rb)) for s in ("early", "late", "hybrid")}
        rows.append((max(ra.macro_f, rb.macro_f), fused["early"].macro_f, fused["hybrid"].macro_f,
                     fused["late"].dim))
    single, early, hybrid = np.mean([r[:3] for r in rows], axis=0)
    late_dims = {r[3] for r in rows}
    ok = early - single >= 5.0 and hybrid - single >= 5.0 and hybrid >= early - 0.5 and late_dims == {2}
    report(8, ok, f"mean over 5 corpora: best single {single:.2f}, early {early:.2f}, "
           f"hybrid {hybrid:.2f} (hybrid - early {hybrid - early:+.2f}), late dim {late_dims}")


def test_9_feature_study():
    r = np.random.default_rng(0)
    n = 300
    y = (np.arange(n) % 3 == 0).astype(int)
    E = r.normal(size=(n, 16))
    E[:, 0] += 2.5 * y
    plan = FoldPlan(seed=1)
    dup = capture_analysis(E, E[:, 0].copy(), y, plan, name="redundant")
    E0 = r.normal(size=(n, 16))
    sig = capture_analysis(E0, 3.0 * y + r.normal(size=n), y, plan, name="signal")
    part = categorize(0.7, 0.4)
    ok = (dup.category is Category.CAPTURED and abs(dup.delta) < 0.5
          and sig.category is Category.NOT_CAPTURED and sig.delta >= 0.5 and sig.p_value < 0.05
          and part is Category.PARTIAL)
    report(9, ok, f"redundant {dup.category.value} (delta {dup.delta:+.2f}), "
           f"signal {sig.category.value} (delta {sig.delta:+.2f}, p {sig.p_value:.1e}), "
           f"(0.7, 0.4) {part.value}")


def brute_measures(full, before, after):
    """Reference values computed by direct enumeration and dense linear algebra."""

    def nbrs(g):
        adj = {v: set() for v in g.vertices}
        for u, v in g.edges:
            adj[u].add(v)
            adj[v].add(u)
        return adj

    def closeness(g):
        adj, n = nbrs(g), g.n
        dist = {u: {v: (0 if u == v else 1 if v in adj[u] else np.inf) for v in g.vertices}
                for u in g.vertices}
        for k, i, j in itertools.product(g.vertices, repeat=3):
            dist[i][j] = min(dist[i][j], dist[i][k] + dist[k][j])
        if n < 2:
            return {u: 0.0 for u in g.vertices}
        return {u: sum(1 / dist[u][v] for v in g.vertices if v != u) / (n - 1) for u in g.vertices}

    def core_mean(g):
        return float(np.mean(list(nx.core_number(nx.Graph(nbrs(g))).values()))) if g.n else 0.0

    def authority(g):
        A = np.zeros((g.n, g.n))
        pos = {v: i for i, v in enumerate(g.vertices)}
        for u, v in g.edges:
            A[pos[u], pos[v]] = 1
        if not A.any():
            return 0.0
        vals, vecs = np.linalg.eigh(A.T @ A)
        top = vecs[:, vals > vals[-1] * (1 - 1e-9)]
        a = top @ (top.T @ np.ones(g.n))  # limit of power iteration from the all-ones vector
        return float(np.mean(a / a.max()))

    def pagerank_at_target(g):
        n, pos = g.n, {v: i for i, v in enumerate(g.vertices)}
        W = np.zeros((n, n))
        for (u, v), e in g.edges.items():
            W[pos[u], pos[v]] = e.weight
        out = W.sum(1)
        T = np.array([W[i] / out[i] if out[i] else np.full(n, 1 / n) for i in range(n)])
        x = np.linalg.solve(np.eye(n) - 0.85 * T.T, np.full(n, 0.15 / n))
        return x[pos[g.targeted_vertex]] / x.sum()

    t = full.targeted_vertex
    degree = len(nbrs(full)[t]) / (full.n - 1) if full.n > 1 else 0.0
    recip = sum((v, u) in full.edges for u, v in full.edges) / len(full.edges) if full.edges else 0.0
    cb = closeness(before)
    return np.array([
        authority(full), core_mean(full), core_mean(before),
        float(np.mean(list(cb.values()))) if before.n else 0.0,
        cb[before.targeted_vertex], closeness(after)[after.targeted_vertex],
        pagerank_at_target(full), degree, float(full.n), recip,
    ])


def test_10_graph_measure_oracles():
    err = np.zeros(10)
    for seed in range(60):
        r = random.Random(seed)
        gs = [random_graph(r, r.randint(1, 10), r.choice((0.15, 0.3, 0.5))) for _ in range(3)]
        err = np.maximum(err, np.abs(graph_best_features(*gs) - brute_measures(*gs)))
    report(10, err.max() < 1e-6, f"max error per measure {np.array2string(err, precision=1, max_line_width=200)}")


def test_11_metric_arithmetic():
    cm = confusion([1, 1, 1, 1, 0, 0, 0, 0, 0, 0], [1, 1, 1, 0, 1, 0, 0, 0, 0, 0])
    hand = 100 * (0.75 + 5 / 6) / 2
    cm2 = confusion([1] * 5 + [0] * 5, [1, 1, 0, 0, 0, 0, 0, 0, 0, 1])
    # positive: P=2/3 R=2/5 F=1/2; negative: P=4/7 R=4/5 F=2/3
    hand2 = 100 * (0.5 + 2 / 3) / 2
    perfect = macro_scores(confusion([0, 1, 1, 0], [0, 1, 1, 0]))[2]
    e1, e2 = abs(macro_scores(cm)[2] - hand), abs(macro_scores(cm2)[2] - hand2)
    ok = e1 < 1e-9 and e2 < 1e-9 and perfect == 100.0
    report(11, ok, f"hand-matrix errors {e1:.1e} and {e2:.1e}, perfect prediction {perfect}")
