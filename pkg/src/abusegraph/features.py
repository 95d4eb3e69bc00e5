"""Hand-crafted best features and the embedding capture analysis.

Three text features (capital ratio, abuse-class TF-IDF, naive Bayes score)
and ten graph measures. A feature is *captured* by an embedding when
appending it barely moves the macro F.
"""
from __future__ import annotations

import enum
import math
from collections import Counter
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np
from scipy import stats

from .evaluation import FoldPlan, LinearHP, confusion, macro_scores, train_linear
from .graph import ConvGraph
from .ingest import ABUSIVE, Conversation, tokenize

CAPTURE_THRESHOLD = 0.50
ALPHA = 0.05


# -- text features ---------------------------------------------------------------

def capital_ratio(text: str) -> float:
    letters = [c for c in text if c.isalpha()]
    if not letters:
        return 0.0
    return sum(c.isupper() for c in letters) / len(letters)


@dataclass
class TextStats:
    """Corpus statistics fitted on training messages only."""

    n_abuse_docs: int
    abuse_df: Counter
    class_counts: dict[int, Counter]
    class_totals: dict[int, int]
    log_prior_odds: float
    vocabulary: frozenset

    @classmethod
    def fit(cls, texts: Sequence[str], y: Sequence[int], alpha: float = 1.0) -> "TextStats":
        y = [int(v) for v in y]
        if len(texts) != len(y):
            raise ValueError("one label per text required")
        tokens = [tokenize(t) for t in texts]
        df = Counter()
        counts = {0: Counter(), 1: Counter()}
        for toks, lab in zip(tokens, y):
            counts[lab].update(toks)
            if lab == 1:
                df.update(set(toks))
        n1 = sum(y)
        n0 = len(y) - n1
        prior = math.log((n1 + alpha) / (n0 + alpha))
        vocab = frozenset(counts[0]) | frozenset(counts[1])
        totals = {c: sum(counts[c].values()) for c in (0, 1)}
        return cls(n1, df, counts, totals, prior, vocab)

    def idf(self, token: str) -> float:
        return math.log((1 + self.n_abuse_docs) / (1 + self.abuse_df.get(token, 0))) + 1.0

    def tfidf(self, text: str) -> float:
        toks = tokenize(text)
        if not toks:
            return 0.0
        tf = Counter(toks)
        return float(np.mean([c / len(toks) * self.idf(t) for t, c in tf.items()]))

    def nb_score(self, text: str, alpha: float = 1.0) -> float:
        """Log-odds of the abusive class under multinomial naive Bayes."""
        v = len(self.vocabulary)
        score = self.log_prior_odds
        for t, c in Counter(tokenize(text)).items():
            if t not in self.vocabulary:
                continue
            p1 = (self.class_counts[1][t] + alpha) / (self.class_totals[1] + alpha * v)
            p0 = (self.class_counts[0][t] + alpha) / (self.class_totals[0] + alpha * v)
            score += c * (math.log(p1) - math.log(p0))
        return score


def text_best_features(text: str, tstats: TextStats) -> np.ndarray:
    return np.array([capital_ratio(text), tstats.tfidf(text), tstats.nb_score(text)])


def text_feature_builder(convs: Sequence[Conversation], column: int) -> Callable[[np.ndarray], np.ndarray]:
    """Fold-scoped text feature: statistics fitted on the given training rows."""
    texts = [c.target.text for c in convs]
    y = np.array([c.label == ABUSIVE for c in convs], dtype=int)

    def build(train_idx: np.ndarray) -> np.ndarray:
        ts = TextStats.fit([texts[i] for i in train_idx], y[train_idx])
        return np.array([text_best_features(t, ts)[column] for t in texts])

    return build


# -- graph measures ----------------------------------------------------------------

def _index(g: ConvGraph):
    return {v: i for i, v in enumerate(g.vertices)}


def adjacency(g: ConvGraph, weighted: bool = False) -> np.ndarray:
    idx = _index(g)
    A = np.zeros((g.n, g.n))
    for (u, v), e in g.edges.items():
        A[idx[u], idx[v]] = e.weight if weighted else 1.0
    return A


def _undirected(g: ConvGraph) -> np.ndarray:
    A = adjacency(g)
    return np.maximum(A, A.T)


def pagerank(g: ConvGraph, damping: float = 0.85, tol: float = 1e-10,
             max_iter: int = 10_000) -> np.ndarray:
    """Weighted PageRank; dangling mass is spread uniformly."""
    n = g.n
    if n == 0:
        return np.zeros(0)
    W = adjacency(g, weighted=True)
    out = W.sum(axis=1)
    dangling = out == 0
    T = np.divide(W, out[:, None], out=np.zeros_like(W), where=~dangling[:, None])
    x = np.full(n, 1.0 / n)
    for _ in range(max_iter):
        new = damping * (x @ T + x[dangling].sum() / n) + (1 - damping) / n
        if np.abs(new - x).sum() < tol:
            return new
        x = new
    return x


def hits_authority(g: ConvGraph, tol: float = 1e-12, max_iter: int = 10_000) -> np.ndarray:
    """Authority scores by power iteration on A^T A, scaled to a maximum of 1."""
    A = adjacency(g)
    if g.n == 0 or not A.any():
        return np.zeros(g.n)
    M = A.T @ A
    a = np.ones(g.n)
    for _ in range(max_iter):
        new = M @ a
        new /= new.max()
        if np.abs(new - a).max() < tol:
            return new
        a = new
    return a


def coreness(g: ConvGraph) -> np.ndarray:
    """k-core index of every vertex on the undirected simple view."""
    A = _undirected(g)
    deg = A.sum(axis=1)
    alive = np.ones(g.n, dtype=bool)
    core = np.zeros(g.n)
    k = 0
    while alive.any():
        k = max(k, int(deg[alive].min()))
        while True:
            peel = alive & (deg <= k)
            if not peel.any():
                break
            core[peel] = k
            alive &= ~peel
            deg = (A * alive[None, :]).sum(axis=1)
    return core


def _bfs_lengths(A: np.ndarray, s: int) -> np.ndarray:
    dist = np.full(A.shape[0], np.inf)
    dist[s] = 0
    frontier = [s]
    d = 0
    while frontier:
        d += 1
        nxt = []
        for u in frontier:
            for v in np.flatnonzero(A[u]):
                if dist[v] == np.inf:
                    dist[v] = d
                    nxt.append(v)
        frontier = nxt
    return dist


def harmonic_closeness(g: ConvGraph) -> np.ndarray:
    """Mean inverse distance to the other vertices; unreachable pairs add 0."""
    n = g.n
    if n < 2:
        return np.zeros(n)
    A = _undirected(g)
    out = np.zeros(n)
    for s in range(n):
        d = _bfs_lengths(A, s)
        d[s] = np.inf
        out[s] = (1.0 / d).sum() / (n - 1)
    return out


def degree_centrality(g: ConvGraph) -> np.ndarray:
    if g.n < 2:
        return np.zeros(g.n)
    return _undirected(g).sum(axis=1) / (g.n - 1)


def reciprocity(g: ConvGraph) -> float:
    if not g.edges:
        return 0.0
    return sum((v, u) in g.edges for u, v in g.edges) / len(g.edges)


GRAPH_FEATURE_NAMES = (
    "authority-graph(Full)", "coreness-graph(Full)", "coreness-graph(Before)",
    "closeness-graph(Before)", "closeness-vertex(Before)", "closeness-vertex(After)",
    "pagerank-vertex(Full)", "degree-vertex(Full)", "vertex-count(Full)", "reciprocity(Full)",
)
TEXT_FEATURE_NAMES = ("capital-ratio", "tfidf-abuse", "naive-bayes")


def _at_target(g: ConvGraph, values: np.ndarray) -> float:
    return float(values[_index(g)[g.targeted_vertex]])


def _mean(values: np.ndarray) -> float:
    return float(values.mean()) if len(values) else 0.0


def graph_best_features(g_full: ConvGraph, g_before: ConvGraph, g_after: ConvGraph) -> np.ndarray:
    return np.array([
        _mean(hits_authority(g_full)),
        _mean(coreness(g_full)),
        _mean(coreness(g_before)),
        _mean(harmonic_closeness(g_before)),
        _at_target(g_before, harmonic_closeness(g_before)),
        _at_target(g_after, harmonic_closeness(g_after)),
        _at_target(g_full, pagerank(g_full)),
        _at_target(g_full, degree_centrality(g_full)),
        float(g_full.n),
        reciprocity(g_full),
    ])


class Level(enum.Enum):
    GRAPH = "graph"
    VERTEX = "vertex"


@dataclass(frozen=True)
class BestFeature:
    name: str
    level: Level
    scope: str  # Full | Before | After
    column: int  # position in the graph or text feature vector


BEST_GRAPH_FEATURES = tuple(
    BestFeature(name, Level.VERTEX if "vertex-" in name and "count" not in name else Level.GRAPH,
                name[name.index("(") + 1:-1], i)
    for i, name in enumerate(GRAPH_FEATURE_NAMES)
)


# -- capture analysis -------------------------------------------------------------

class Category(enum.Enum):
    CAPTURED = "Captured"
    PARTIAL = "Partial"
    NOT_CAPTURED = "NotCaptured"


def categorize(delta: float, p: float) -> Category:
    if delta < CAPTURE_THRESHOLD:
        return Category.CAPTURED
    if p < ALPHA:
        return Category.NOT_CAPTURED
    return Category.PARTIAL


@dataclass(frozen=True)
class CaptureVerdict:
    feature: str
    baseline_f: float
    augmented_f: float
    delta: float
    p_value: float
    category: Category

    def row(self) -> str:
        return (f"{self.feature:<26} base={self.baseline_f:6.2f} aug={self.augmented_f:6.2f} "
                f"delta={self.delta:+6.2f} p={self.p_value:.4f} {self.category.value}")


def _run_scores(X_for_run, y, runs, hp) -> np.ndarray:
    out = []
    for train, test in runs:
        X = X_for_run(train)
        model = train_linear(X[train], y[train], hp)
        out.append(macro_scores(confusion(y[test], model.predict(X[test])))[2])
    return np.array(out)


def paired_p_value(a: np.ndarray, b: np.ndarray) -> float:
    diff = np.asarray(b) - np.asarray(a)
    if np.allclose(diff, diff[0]):
        # constant differences: the t statistic is undefined
        return 1.0 if abs(diff[0]) < 1e-12 else 0.0
    return float(stats.ttest_rel(b, a).pvalue)


def capture_analysis(embedding, feature, y, plan: FoldPlan = FoldPlan(),
                     hp: LinearHP = LinearHP(), name: str = "feature",
                     baseline_runs: np.ndarray | None = None,
                     baseline_plan: FoldPlan | None = None) -> CaptureVerdict:
    """Compare an embedding alone with the embedding plus one standardized feature.

    ``feature`` is either a vector over examples or a callable mapping the
    training rows of a run to a vector over all examples (fold-scoped
    statistics).
    """
    if baseline_plan is not None and baseline_plan != plan:
        raise ValueError("baseline and augmented evaluations use different fold plans")
    E = np.asarray(getattr(embedding, "vectors", embedding), dtype=float)
    y = np.asarray(y).astype(int)
    runs = plan.runs(y)
    build = feature if callable(feature) else (lambda _train, f=np.asarray(feature, float): f)

    def augmented(train):
        f = np.asarray(build(train), dtype=float)
        if f.shape != (len(y),):
            raise ValueError("feature must have one value per example")
        mu, sd = f[train].mean(), f[train].std()
        return np.column_stack([E, (f - mu) / (sd if sd > 1e-12 else 1.0)])

    base = baseline_runs if baseline_runs is not None else _run_scores(lambda _t: E, y, runs, hp)
    aug = _run_scores(augmented, y, runs, hp)
    if len(base) != len(aug):
        raise ValueError("baseline and augmented evaluations have different run counts")
    delta = float(aug.mean() - base.mean())
    p = paired_p_value(base, aug)
    return CaptureVerdict(name, float(base.mean()), float(aug.mean()), delta, p, categorize(delta, p))


def verdict_table(verdicts: dict[str, Sequence[CaptureVerdict]]) -> str:
    """Plain-text feature x embedding table of categories, deltas and p-values."""
    lines = ["embedding\tfeature\tcategory\tdelta\tp"]
    for emb, vs in verdicts.items():
        for v in vs:
            lines.append(f"{emb}\t{v.feature}\t{v.category.value}\t{v.delta:.2f}\t{v.p_value:.4f}")
    return "\n".join(lines) + "\n"
