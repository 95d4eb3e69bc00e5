"""Whole-graph vectors: PV-DBOW skip-gram training and spectral features."""
from __future__ import annotations

import logging
import math
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np
from numba import njit

from .graph import ConvGraph
from .wl import AttributeScheme, GraphDocument, build_documents

log = logging.getLogger(__name__)

METHODS = {
    "g2v": "plain",
    "sg2v_n": "sg2v_n",
    "wda_sg2v_n": "wda_n",
    "sg2v_sb": "sg2v_sb",
    "wda_sg2v_sb": "wda_sb",
    "spectral": None,
}


@dataclass(frozen=True)
class TrainConfig:
    dim: int = 128
    epochs: int = 50
    learning_rate: float = 0.025
    min_learning_rate: float = 0.0001
    negatives: int = 5
    iterations: int = 2  # WL depth
    seed: int = 0
    zero_tol: float = 1e-9  # spectral features only

    def __post_init__(self):
        if self.dim < 1 or self.epochs < 1 or self.negatives < 1:
            raise ValueError("dim, epochs and negatives must all be >= 1")


@dataclass
class EmbeddingMatrix:
    ids: list[str]
    vectors: np.ndarray
    method: str = ""
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.vectors = np.asarray(self.vectors, dtype=np.float64)
        if self.vectors.ndim != 2 or self.vectors.shape[0] != len(self.ids):
            raise ValueError("one vector row per graph id required")
        if len(set(self.ids)) != len(self.ids):
            raise ValueError("duplicate graph ids in embedding")

    @property
    def dim(self) -> int:
        return self.vectors.shape[1]

    def take(self, ids: Sequence[str]) -> np.ndarray:
        """Rows for ``ids`` in the given order; missing ids raise ``KeyError``."""
        index = {g: i for i, g in enumerate(self.ids)}
        missing = [g for g in ids if g not in index]
        if missing:
            raise KeyError(f"graph ids missing from embedding: {', '.join(missing)}")
        return self.vectors[[index[g] for g in ids]]

    def save(self, path) -> None:
        header = {"method": self.method, "dim": self.dim, **self.meta}
        with open(path, "w", encoding="utf-8") as fh:
            fh.write("#" + "\t".join(f"{k}={v}" for k, v in header.items()) + "\n")
            for gid, row in zip(self.ids, self.vectors):
                fh.write(gid + "\t" + "\t".join(repr(float(x)) for x in row) + "\n")

    @classmethod
    def load(cls, path) -> "EmbeddingMatrix":
        meta: dict = {}
        ids, rows = [], []
        with open(path, encoding="utf-8") as fh:
            for lineno, line in enumerate(fh, start=1):
                line = line.rstrip("\n")
                if not line:
                    continue
                if line.startswith("#"):
                    for kv in line[1:].split("\t"):
                        if "=" in kv:
                            k, v = kv.split("=", 1)
                            meta[k] = v
                    continue
                parts = line.split("\t")
                try:
                    rows.append([float(x) for x in parts[1:]])
                except ValueError as exc:
                    raise ValueError(f"{path}:{lineno}: bad number ({exc})") from exc
                ids.append(parts[0])
        if not rows:
            raise ValueError(f"{path}: no embedding rows")
        if len({len(r) for r in rows}) != 1:
            raise ValueError(f"{path}: rows have different dimensions")
        method = meta.pop("method", "")
        meta.pop("dim", None)
        return cls(ids, np.array(rows), method, meta)


# -- PV-DBOW -------------------------------------------------------------------

@njit(cache=True)
def _sigmoid(x):
    if x >= 0:
        return 1.0 / (1.0 + math.exp(-x))
    z = math.exp(x)
    return z / (1.0 + z)


@njit(cache=True)
def _log_sigmoid(x):
    if x >= 0:
        return -math.log1p(math.exp(-x))
    return x - math.log1p(math.exp(x))


@njit(cache=True)
def _pvdbow_epoch(G, W, doc_of, lab_of, order, negs, step0, total_steps, lr0, lr_min):
    d = G.shape[1]
    k = negs.shape[1]
    grad = np.zeros(d)
    loss = 0.0
    step = step0
    for p in range(order.shape[0]):
        pair = order[p]
        gi = doc_of[pair]
        target = lab_of[pair]
        lr = lr0 - (lr0 - lr_min) * step / total_steps
        if lr < lr_min:
            lr = lr_min
        step += 1
        grad[:] = 0.0
        for j in range(k + 1):
            if j == 0:
                w = target
                label = 1.0
            else:
                w = negs[p, j - 1]
                if w == target:
                    continue
                label = 0.0
            dot = 0.0
            for c in range(d):
                dot += G[gi, c] * W[w, c]
            if label > 0:
                loss -= _log_sigmoid(dot)
            else:
                loss -= _log_sigmoid(-dot)
            g = (label - _sigmoid(dot)) * lr
            for c in range(d):
                grad[c] += g * W[w, c]
                W[w, c] += g * G[gi, c]
        for c in range(d):
            G[gi, c] += grad[c]
    return loss


def pair_loss(G: np.ndarray, W: np.ndarray, doc: int, label: int, negatives) -> float:
    """Negative-sampling loss of one (graph, label) pair."""
    loss = -_log_sigmoid(float(G[doc] @ W[label]))
    for w in negatives:
        if w != label:
            loss -= _log_sigmoid(-float(G[doc] @ W[w]))
    return loss


@dataclass
class PVDBOWResult:
    embedding: EmbeddingMatrix
    label_vectors: np.ndarray
    vocabulary: np.ndarray
    epoch_losses: list[float]


def train_pvdbow_full(docs: Sequence[GraphDocument], cfg: TrainConfig = TrainConfig(),
                      method: str = "pvdbow") -> PVDBOWResult:
    """Train graph vectors that predict their own labels (negative sampling).

    Pairs are visited in a seeded permutation per epoch; negatives come from
    the unigram distribution raised to 0.75. Learning rate decays linearly.
    """
    if not docs:
        raise ValueError("empty corpus")
    for doc in docs:
        if not doc.labels:
            raise ValueError(f"graph {doc.graph_id} has an empty document")
    vocab, inverse = np.unique(np.concatenate([np.asarray(d.labels) for d in docs]),
                               return_inverse=True)
    lab_of = inverse.astype(np.int64)
    doc_of = np.repeat(np.arange(len(docs)), [len(d.labels) for d in docs]).astype(np.int64)
    counts = np.bincount(lab_of, minlength=len(vocab)).astype(np.float64)
    noise = counts ** 0.75
    cdf = np.cumsum(noise / noise.sum())
    cdf[-1] = 1.0

    rng = np.random.default_rng(cfg.seed)
    bound = 0.5 / cfg.dim
    G = rng.uniform(-bound, bound, size=(len(docs), cfg.dim))
    W = rng.uniform(-bound, bound, size=(len(vocab), cfg.dim))
    n_pairs = len(lab_of)
    total = cfg.epochs * n_pairs
    losses = []
    t0 = time.perf_counter()
    for epoch in range(cfg.epochs):
        order = rng.permutation(n_pairs)
        negs = np.searchsorted(cdf, rng.random((n_pairs, cfg.negatives)), side="right")
        negs = np.minimum(negs, len(vocab) - 1).astype(np.int64)
        loss = _pvdbow_epoch(G, W, doc_of, lab_of, order, negs, epoch * n_pairs, total,
                             cfg.learning_rate, cfg.min_learning_rate)
        losses.append(loss / n_pairs)
    log.debug("pvdbow: %d docs, %d labels, %.2fs", len(docs), len(vocab), time.perf_counter() - t0)
    emb = EmbeddingMatrix(
        [d.graph_id for d in docs], G, method,
        {"seed": cfg.seed, "epochs": cfg.epochs, "final_loss": f"{losses[-1]:.6f}"},
    )
    return PVDBOWResult(emb, W, vocab, losses)


def train_pvdbow(docs: Sequence[GraphDocument], cfg: TrainConfig = TrainConfig(),
                 method: str = "pvdbow") -> EmbeddingMatrix:
    return train_pvdbow_full(docs, cfg, method).embedding


# -- spectral features -----------------------------------------------------------

@njit(cache=True)
def jacobi_eigenvalues(A, tol=1e-12, max_sweeps=100):
    """Eigenvalues of a symmetric matrix by cyclic Jacobi rotations (ascending)."""
    a = A.copy()
    n = a.shape[0]
    for _ in range(max_sweeps):
        off = 0.0
        for i in range(n):
            for j in range(i + 1, n):
                off += a[i, j] * a[i, j]
        if off <= tol * tol:
            break
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = a[p, q]
                if abs(apq) < 1e-300:
                    continue
                theta = (a[q, q] - a[p, p]) / (2.0 * apq)
                if theta >= 0:
                    t = 1.0 / (theta + math.sqrt(1.0 + theta * theta))
                else:
                    t = -1.0 / (-theta + math.sqrt(1.0 + theta * theta))
                c = 1.0 / math.sqrt(1.0 + t * t)
                s = t * c
                for k in range(n):
                    akp = a[k, p]
                    akq = a[k, q]
                    a[k, p] = c * akp - s * akq
                    a[k, q] = s * akp + c * akq
                for k in range(n):
                    apk = a[p, k]
                    aqk = a[q, k]
                    a[p, k] = c * apk - s * aqk
                    a[q, k] = s * apk + c * aqk
    return np.sort(np.diag(a).copy())


def normalized_laplacian(g: ConvGraph) -> np.ndarray:
    """Symmetric normalized Laplacian of the undirected, unweighted, sign-blind view."""
    index = {v: i for i, v in enumerate(g.vertices)}
    A = np.zeros((g.n, g.n))
    for u, v in g.edges:
        A[index[u], index[v]] = A[index[v], index[u]] = 1.0
    deg = A.sum(axis=1)
    inv_sqrt = np.zeros_like(deg)
    nz = deg > 0
    inv_sqrt[nz] = 1.0 / np.sqrt(deg[nz])
    L = -(inv_sqrt[:, None] * A * inv_sqrt[None, :])
    L[np.diag_indices_from(L)] += nz.astype(float)
    return L


def spectral_features(g: ConvGraph, k: int, zero_tol: float = 1e-9) -> np.ndarray:
    """The ``k`` smallest strictly positive Laplacian eigenvalues, zero-padded."""
    if k < 1:
        raise ValueError("k must be >= 1")
    if g.n == 0:
        raise ValueError("empty graph")
    eig = jacobi_eigenvalues(normalized_laplacian(g))
    pos = eig[eig > zero_tol][:k]
    out = np.zeros(k)
    out[: len(pos)] = pos
    return out


# -- corpus dispatch -------------------------------------------------------------

def embed_corpus(graphs: Sequence[ConvGraph], method: str,
                 scheme: AttributeScheme | str = AttributeScheme(),
                 cfg: TrainConfig = TrainConfig(), sb_channels: bool = False) -> EmbeddingMatrix:
    if method not in METHODS:
        raise ValueError(f"unknown method {method!r}; valid methods: {', '.join(METHODS)}")
    if isinstance(scheme, str):
        scheme = AttributeScheme.parse(scheme)
    t0 = time.perf_counter()
    if method == "spectral":
        vecs = np.array([spectral_features(g, cfg.dim, cfg.zero_tol) for g in graphs])
        emb = EmbeddingMatrix([g.id for g in graphs], vecs, method, {"seed": cfg.seed})
    else:
        docs, _ = build_documents(graphs, METHODS[method], scheme, cfg.iterations, sb_channels)
        emb = train_pvdbow(docs, cfg, method)
        emb.meta["scheme"] = str(scheme)
    emb.meta["seconds"] = f"{time.perf_counter() - t0:.2f}"
    return emb
