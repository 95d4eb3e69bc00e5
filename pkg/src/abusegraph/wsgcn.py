"""Whole-graph signed GCN with master nodes (WSGCN / WDA-WSGCN).

Two channels per layer, balanced and unbalanced. Layer 1 aggregates input
features over positive (balanced) or negative (unbalanced) in-neighbors;
layer 2 follows structural balance: a balanced representation collects
balanced reps over positive in-edges and unbalanced reps over negative ones,
and the unbalanced channel the mirror. Aggregation is a mean of in-neighbors
weighted by normalized edge weights. Parameters are shared across the corpus
and trained by edge-sign prediction; the master nodes' final representations
give the graph vector.
"""
from __future__ import annotations

import enum
import json
import logging
import zlib
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .embeddings import EmbeddingMatrix
from .graph import INF, AttributeRecord, ConvGraph, EdgeData

log = logging.getLogger(__name__)

MASTER_PLUS = "__master+__"
MASTER_MINUS = "__master-__"
AUTHOR_BUCKETS = 8
DISTANCE_BUCKETS = ("0", "1", "2", "3+", INF)
N_FEATURES = 1 + len(DISTANCE_BUCKETS) + AUTHOR_BUCKETS + 2


class MasterScheme(enum.Enum):
    PLUS = "plus"
    MINUS = "minus"
    PLUS_MINUS = "plusminus"

    @classmethod
    def parse(cls, text: str) -> "MasterScheme":
        aliases = {"+": "plus", "-": "minus", "pm": "plusminus", "+-": "plusminus",
                   "plusonly": "plus", "minusonly": "minus"}
        key = text.strip().lower().replace("_", "")
        return cls(aliases.get(key, key))


def attach_master_nodes(g: ConvGraph, scheme: MasterScheme) -> ConvGraph:
    """Add master node(s) linked to and from every original vertex (weight 1)."""
    signs = {
        MasterScheme.PLUS: [(1, MASTER_PLUS)],
        MasterScheme.MINUS: [(-1, MASTER_MINUS)],
        MasterScheme.PLUS_MINUS: [(1, MASTER_PLUS), (-1, MASTER_MINUS)],
    }[scheme]
    attrs = dict(g.attributes)
    edges = dict(g.edges)
    next_id = max(g.vertices) + 1
    for sign, author in signs:
        m = next_id
        next_id += 1
        attrs[m] = AttributeRecord(author=author, distance=INF, target=0)
        for v in g.vertices:
            edges[v, m] = EdgeData(1, sign)
            edges[m, v] = EdgeData(1, sign)
    return ConvGraph(g.id, tuple(attrs), attrs, edges, g.targeted_vertex)


def master_vertices(g: ConvGraph) -> list[int]:
    return [v for v in g.vertices if g.attributes[v].author in (MASTER_PLUS, MASTER_MINUS)]


def normalized_in_weights(g: ConvGraph, u: int, sign: int) -> dict[tuple[int, int], float]:
    """Weights of ``u``'s in-edges of one sign, normalized to sum to 1."""
    items = [(v, e.weight) for v, e in g.in_edges(u) if e.sign == sign]
    total = float(sum(w for _, w in items))
    return {(v, u): w / total for v, w in items}


def symmetrized_unweighted(g: ConvGraph) -> ConvGraph:
    """Direction- and weight-blind copy used by the plain WSGCN ablation."""
    edges = {}
    for (u, v), e in g.edges.items():
        edges[u, v] = EdgeData(1, e.sign)
        if (v, u) not in g.edges:
            edges[v, u] = EdgeData(1, e.sign)
    return ConvGraph(g.id, g.vertices, g.attributes, edges, g.targeted_vertex)


def vertex_features(g: ConvGraph) -> np.ndarray:
    X = np.zeros((g.n, N_FEATURES))
    for i, v in enumerate(g.vertices):
        rec = g.attributes[v]
        X[i, 0] = rec.target
        d = rec.distance
        bucket = INF if d == INF else ("3+" if d >= 3 else str(d))
        X[i, 1 + DISTANCE_BUCKETS.index(bucket)] = 1.0
        if rec.author == MASTER_PLUS:
            X[i, -2] = 1.0
        elif rec.author == MASTER_MINUS:
            X[i, -1] = 1.0
        else:
            h = zlib.crc32(rec.author.encode("utf-8")) % AUTHOR_BUCKETS
            X[i, 1 + len(DISTANCE_BUCKETS) + h] = 1.0
    return X


@dataclass
class GraphTensors:
    """Dense per-graph inputs: features, aggregation matrices, edge list."""

    X: np.ndarray
    P: np.ndarray  # P[u, v] = normalized weight of positive edge v -> u
    N: np.ndarray
    masters: list[int]  # row indices
    edge_src: np.ndarray
    edge_dst: np.ndarray
    edge_pos: np.ndarray  # 1.0 for positive edges (original edges only)


def graph_tensors(g_aug: ConvGraph, original: ConvGraph | None = None) -> GraphTensors:
    index = {v: i for i, v in enumerate(g_aug.vertices)}
    n = g_aug.n
    P = np.zeros((n, n))
    N = np.zeros((n, n))
    for u in g_aug.vertices:
        for sign, M in ((1, P), (-1, N)):
            for (v, _), c in normalized_in_weights(g_aug, u, sign).items():
                M[index[u], index[v]] = c
    masters = [index[m] for m in master_vertices(g_aug)]
    src_graph = original if original is not None else g_aug
    mset = set(master_vertices(g_aug))
    edges = [(u, v, e) for (u, v), e in src_graph.edges.items() if u not in mset and v not in mset]
    return GraphTensors(
        vertex_features(g_aug), P, N, masters,
        np.array([index[u] for u, _, _ in edges], dtype=int),
        np.array([index[v] for _, v, _ in edges], dtype=int),
        np.array([1.0 if e.sign > 0 else 0.0 for _, _, e in edges]),
    )


@dataclass(frozen=True)
class WsgcnConfig:
    hidden: int = 64  # layer-1 width, split evenly between the two channels
    out: int = 128  # layer-2 width, split evenly between the two channels
    epochs: int = 20
    learning_rate: float = 0.05
    weighted_directed: bool = True  # False gives the plain WSGCN ablation
    seed: int = 0


PARAM_NAMES = ("W_B1", "W_U1", "W_B2", "W_U2", "theta", "beta")


@dataclass
class WsgcnModel:
    params: dict[str, np.ndarray]
    scheme: MasterScheme = MasterScheme.PLUS_MINUS
    config: WsgcnConfig = field(default_factory=WsgcnConfig)
    projection: np.ndarray | None = None  # (n_masters * out, out); fixed, not trained

    @classmethod
    def init(cls, scheme: MasterScheme, cfg: WsgcnConfig = WsgcnConfig(),
             n_features: int = N_FEATURES) -> "WsgcnModel":
        if cfg.hidden % 2 or cfg.out % 2:
            raise ValueError("hidden and out widths must be even")
        rng = np.random.default_rng(cfg.seed)
        h1, h2 = cfg.hidden // 2, cfg.out // 2

        def glorot(a, b):
            lim = np.sqrt(6.0 / (a + b))
            return rng.uniform(-lim, lim, size=(a, b))

        params = {
            "W_B1": glorot(2 * n_features, h1),
            "W_U1": glorot(2 * n_features, h1),
            "W_B2": glorot(3 * h1, h2),
            "W_U2": glorot(3 * h1, h2),
            "theta": glorot(4 * h2, 1)[:, 0],
            "beta": np.zeros(1),
        }
        n_masters = 2 if scheme is MasterScheme.PLUS_MINUS else 1
        proj = None
        if n_masters > 1:
            proj = rng.normal(0.0, 1.0 / np.sqrt(n_masters * cfg.out), size=(n_masters * cfg.out, cfg.out))
        return cls(params, scheme, cfg, proj)

    def check(self, n_features: int) -> None:
        p = self.params
        if p["W_B1"].shape[0] != 2 * n_features or p["W_U1"].shape[0] != 2 * n_features:
            raise ValueError(
                f"dimension mismatch: layer 1 expects {p['W_B1'].shape[0] // 2} input features, "
                f"got {n_features}"
            )
        h1 = p["W_B1"].shape[1]
        if p["W_B2"].shape[0] != 3 * h1 or p["W_U2"].shape[0] != 3 * h1:
            raise ValueError("dimension mismatch between layer 1 and layer 2")
        if p["theta"].shape[0] != 2 * (p["W_B2"].shape[1] + p["W_U2"].shape[1]):
            raise ValueError("dimension mismatch in the sign predictor")

    # -- persistence -----------------------------------------------------------
    def to_json(self) -> str:
        doc = {
            "scheme": self.scheme.value,
            "config": self.config.__dict__,
            "layers": {k: {"shape": list(v.shape), "data": v.ravel().tolist()}
                       for k, v in self.params.items()},
        }
        if self.projection is not None:
            doc["layers"]["projection"] = {"shape": list(self.projection.shape),
                                           "data": self.projection.ravel().tolist()}
        return json.dumps(doc)

    @classmethod
    def from_json(cls, text: str) -> "WsgcnModel":
        doc = json.loads(text)
        layers = {k: np.array(v["data"], dtype=float).reshape(v["shape"])
                  for k, v in doc["layers"].items()}
        proj = layers.pop("projection", None)
        return cls(layers, MasterScheme(doc["scheme"]), WsgcnConfig(**doc["config"]), proj)


def _forward_cache(T: GraphTensors, p: dict):
    X, P, N = T.X, T.P, T.N
    a_B = np.hstack([P @ X, X])
    a_U = np.hstack([N @ X, X])
    h_B = np.tanh(a_B @ p["W_B1"])
    h_U = np.tanh(a_U @ p["W_U1"])
    b_B = np.hstack([P @ h_B, N @ h_U, h_B])
    b_U = np.hstack([P @ h_U, N @ h_B, h_U])
    z_B = np.tanh(b_B @ p["W_B2"])
    z_U = np.tanh(b_U @ p["W_U2"])
    return dict(a_B=a_B, a_U=a_U, h_B=h_B, h_U=h_U, b_B=b_B, b_U=b_U, z_B=z_B, z_U=z_U)


def forward(g_aug: ConvGraph | GraphTensors, model: WsgcnModel) -> tuple[np.ndarray, np.ndarray]:
    """Vertex representations (rows in vertex order) and the graph vector."""
    T = g_aug if isinstance(g_aug, GraphTensors) else graph_tensors(g_aug)
    model.check(T.X.shape[1])
    c = _forward_cache(T, model.params)
    Z = np.hstack([c["z_B"], c["z_U"]])
    if not T.masters:
        raise ValueError("graph has no master node; call attach_master_nodes first")
    rep = np.concatenate([Z[m] for m in T.masters])
    if model.projection is not None:
        rep = rep @ model.projection
    return Z, rep


def _sigmoid(x):
    return 0.5 * (1.0 + np.tanh(0.5 * x))


def loss_and_grads(T: GraphTensors, p: dict, with_grads: bool = True):
    """Mean binary cross-entropy of edge-sign prediction and its gradients."""
    c = _forward_cache(T, p)
    Z = np.hstack([c["z_B"], c["z_U"]])
    m = len(T.edge_src)
    if m == 0:
        return 0.0, {k: np.zeros_like(v) for k, v in p.items()}
    d2 = Z.shape[1]
    pair = np.hstack([Z[T.edge_src], Z[T.edge_dst]])
    logits = pair @ p["theta"] + p["beta"][0]
    y = T.edge_pos
    loss = float(np.mean(np.logaddexp(0.0, logits) - y * logits))
    if not with_grads:
        return loss, None

    dlog = (_sigmoid(logits) - y) / m
    grads = {"theta": pair.T @ dlog, "beta": np.array([dlog.sum()])}
    dZ = np.zeros_like(Z)
    np.add.at(dZ, T.edge_src, np.outer(dlog, p["theta"][:d2]))
    np.add.at(dZ, T.edge_dst, np.outer(dlog, p["theta"][d2:]))

    h2 = c["z_B"].shape[1]
    h1 = c["h_B"].shape[1]
    dpre_B2 = dZ[:, :h2] * (1.0 - c["z_B"] ** 2)
    dpre_U2 = dZ[:, h2:] * (1.0 - c["z_U"] ** 2)
    grads["W_B2"] = c["b_B"].T @ dpre_B2
    grads["W_U2"] = c["b_U"].T @ dpre_U2
    db_B = dpre_B2 @ p["W_B2"].T
    db_U = dpre_U2 @ p["W_U2"].T
    dh_B = T.P.T @ db_B[:, :h1] + db_B[:, 2 * h1:] + T.N.T @ db_U[:, h1:2 * h1]
    dh_U = T.P.T @ db_U[:, :h1] + db_U[:, 2 * h1:] + T.N.T @ db_B[:, h1:2 * h1]
    dpre_B1 = dh_B * (1.0 - c["h_B"] ** 2)
    dpre_U1 = dh_U * (1.0 - c["h_U"] ** 2)
    grads["W_B1"] = c["a_B"].T @ dpre_B1
    grads["W_U1"] = c["a_U"].T @ dpre_U1
    return loss, grads


def sign_accuracy(T: GraphTensors, model: WsgcnModel) -> tuple[int, int]:
    c = _forward_cache(T, model.params)
    Z = np.hstack([c["z_B"], c["z_U"]])
    if len(T.edge_src) == 0:
        return 0, 0
    logits = np.hstack([Z[T.edge_src], Z[T.edge_dst]]) @ model.params["theta"] + model.params["beta"][0]
    return int(np.sum((logits > 0) == (T.edge_pos > 0.5))), len(T.edge_src)


def prepare(graphs: Sequence[ConvGraph], scheme: MasterScheme,
            weighted_directed: bool = True) -> list[GraphTensors]:
    out = []
    for g in graphs:
        base = g if weighted_directed else symmetrized_unweighted(g)
        out.append(graph_tensors(attach_master_nodes(base, scheme), original=g))
    return out


def train_wsgcn(graphs: Sequence[ConvGraph], scheme: MasterScheme | str = MasterScheme.PLUS_MINUS,
                cfg: WsgcnConfig = WsgcnConfig(),
                tensors: Sequence[GraphTensors] | None = None) -> tuple[WsgcnModel, EmbeddingMatrix]:
    """Fit shared parameters by per-graph SGD, then embed every graph."""
    if not graphs:
        raise ValueError("empty corpus")
    if isinstance(scheme, str):
        scheme = MasterScheme.parse(scheme)
    tensors = list(tensors) if tensors is not None else prepare(graphs, scheme, cfg.weighted_directed)
    if not any(np.any(T.edge_pos < 0.5) for T in tensors):
        log.warning("corpus has no negative edge; the sign predictor is degenerate")
    model = WsgcnModel.init(scheme, cfg, tensors[0].X.shape[1])
    rng = np.random.default_rng(cfg.seed + 1)
    history = []
    for epoch in range(cfg.epochs):
        lr = cfg.learning_rate * (1.0 - epoch / cfg.epochs)
        total = 0.0
        for i in rng.permutation(len(tensors)):
            loss, grads = loss_and_grads(tensors[i], model.params)
            total += loss
            for k in PARAM_NAMES:
                model.params[k] -= lr * grads[k]
        history.append(total / len(tensors))
    vecs = np.array([forward(T, model)[1] for T in tensors])
    method = "wda_wsgcn" if cfg.weighted_directed else "wsgcn"
    emb = EmbeddingMatrix(
        [g.id for g in graphs], vecs, method,
        {"seed": cfg.seed, "epochs": cfg.epochs, "scheme": scheme.value,
         "final_loss": f"{history[-1]:.6f}"},
    )
    return model, emb
