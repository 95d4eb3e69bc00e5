"""Linear max-margin classification, rotating k-fold protocol and fusion."""
from __future__ import annotations

import json
import time
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

FUSION_STRATEGIES = ("early", "late", "hybrid")


@dataclass(frozen=True)
class LinearHP:
    C: float = 1.0
    epochs: int = 600  # full-batch subgradient iterations
    step: float = 0.5
    seed: int = 0


@dataclass
class LinearModel:
    w: np.ndarray
    b: float
    mean: np.ndarray
    scale: np.ndarray

    def decision_function(self, X) -> np.ndarray:
        Z = (np.asarray(X, dtype=float) - self.mean) / self.scale
        return Z @ self.w + self.b

    def predict(self, X) -> np.ndarray:
        return (self.decision_function(X) > 0).astype(int)


def _objective(Z, ys, w, b, lam):
    margins = 1.0 - ys * (Z @ w + b)
    return np.maximum(margins, 0.0).mean() + 0.5 * lam * (w @ w)


def train_linear(X, y, hp: LinearHP = LinearHP()) -> LinearModel:
    """Minimize mean hinge loss + ||w||^2 / (2 C n) on standardized features.

    Full-batch subgradient descent with a 1/sqrt(t) step; the returned
    parameters are the best of the iterates and their tail average. Labels are
    0/1 (1 = positive class). The solver is deterministic, ``hp.seed`` is kept
    for interface symmetry with the other trainers.
    """
    X = np.asarray(X, dtype=float)
    y = np.asarray(y)
    if X.ndim != 2 or X.shape[0] != y.shape[0]:
        raise ValueError("X must be (n, d) with one label per row")
    classes = set(np.unique(y).tolist())
    if len(classes) < 2:
        raise ValueError("training set contains a single class")
    if not classes <= {0, 1}:
        raise ValueError("labels must be 0/1")
    n, d = X.shape
    mean = X.mean(axis=0)
    scale = X.std(axis=0)
    scale[scale < 1e-12] = 1.0
    Z = (X - mean) / scale
    ys = np.where(y == 1, 1.0, -1.0)
    lam = 1.0 / (hp.C * n)

    w = np.zeros(d)
    b = 0.0
    best = (_objective(Z, ys, w, b, lam), w.copy(), b)
    avg_w, avg_b, n_avg = np.zeros(d), 0.0, 0
    tail = hp.epochs // 2
    for t in range(1, hp.epochs + 1):
        active = (ys * (Z @ w + b)) < 1.0
        gw = lam * w - (ys[active] @ Z[active]) / n
        gb = -ys[active].sum() / n
        eta = hp.step / np.sqrt(t)
        w = w - eta * gw
        b = b - eta * gb
        obj = _objective(Z, ys, w, b, lam)
        if obj < best[0]:
            best = (obj, w.copy(), b)
        if t > tail:
            n_avg += 1
            avg_w += (w - avg_w) / n_avg
            avg_b += (b - avg_b) / n_avg
    if n_avg and _objective(Z, ys, avg_w, avg_b, lam) < best[0]:
        best = (None, avg_w, avg_b)
    return LinearModel(best[1], float(best[2]), mean, scale)


# -- metrics -------------------------------------------------------------------

def confusion(y_true, y_pred) -> np.ndarray:
    """2x2 matrix [[TP, FN], [FP, TN]] with class 1 as the positive class."""
    y_true = np.asarray(y_true)
    y_pred = np.asarray(y_pred)
    tp = int(np.sum((y_true == 1) & (y_pred == 1)))
    fn = int(np.sum((y_true == 1) & (y_pred == 0)))
    fp = int(np.sum((y_true == 0) & (y_pred == 1)))
    tn = int(np.sum((y_true == 0) & (y_pred == 0)))
    return np.array([[tp, fn], [fp, tn]])


def _prf(tp, fp, fn):
    p = tp / (tp + fp) if tp + fp else 0.0
    r = tp / (tp + fn) if tp + fn else 0.0
    f = 2 * p * r / (p + r) if p + r else 0.0
    return p, r, f


def class_scores(cm) -> dict[str, tuple[float, float, float]]:
    """Per-class (precision, recall, F) for the positive and negative class."""
    (tp, fn), (fp, tn) = np.asarray(cm)
    return {"positive": _prf(tp, fp, fn), "negative": _prf(tn, fn, fp)}


def macro_scores(cm) -> tuple[float, float, float]:
    """Macro precision, recall and F in percentage points."""
    per = class_scores(cm)
    p = 100 * (per["positive"][0] + per["negative"][0]) / 2
    r = 100 * (per["positive"][1] + per["negative"][1]) / 2
    f = 100 * (per["positive"][2] + per["negative"][2]) / 2
    return p, r, f


# -- folds ---------------------------------------------------------------------

@dataclass(frozen=True)
class FoldPlan:
    """Stratified folds; run r tests on ``n_test`` consecutive folds starting at r."""

    n_folds: int = 10
    n_test: int = 3
    seed: int = 0

    def assign(self, y) -> np.ndarray:
        y = np.asarray(y)
        rng = np.random.default_rng(self.seed)
        folds = np.empty(len(y), dtype=int)
        offset = 0
        for cls in np.unique(y):
            idx = np.flatnonzero(y == cls)
            idx = idx[rng.permutation(len(idx))]
            folds[idx] = (np.arange(len(idx)) + offset) % self.n_folds
            offset += len(idx)
        return folds

    def runs(self, y) -> list[tuple[np.ndarray, np.ndarray]]:
        folds = self.assign(y)
        out = []
        for r in range(self.n_folds):
            test_folds = [(r + j) % self.n_folds for j in range(self.n_test)]
            test = np.isin(folds, test_folds)
            out.append((np.flatnonzero(~test), np.flatnonzero(test)))
        return out


@dataclass
class RunResult:
    confusion: np.ndarray
    train_idx: np.ndarray
    test_idx: np.ndarray
    test_scores: np.ndarray
    seconds: float = 0.0

    @property
    def macro(self) -> tuple[float, float, float]:
        return macro_scores(self.confusion)

    @property
    def macro_f(self) -> float:
        return self.macro[2]


@dataclass
class EvalReport:
    runs: list[RunResult]
    scores: np.ndarray  # out-of-training-fold decision score per example (mean over its test runs)
    dim: int = 0
    name: str = ""
    meta: dict = field(default_factory=dict)

    @property
    def run_f(self) -> np.ndarray:
        return np.array([r.macro_f for r in self.runs])

    def _stat(self, i):
        vals = np.array([r.macro[i] for r in self.runs])
        return float(vals.mean()), float(vals.std())

    @property
    def macro_f(self) -> float:
        return self._stat(2)[0]

    @property
    def macro_f_std(self) -> float:
        return self._stat(2)[1]

    @property
    def macro_precision(self) -> float:
        return self._stat(0)[0]

    @property
    def macro_recall(self) -> float:
        return self._stat(1)[0]

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "dim": self.dim,
            "macro_f": self.macro_f,
            "macro_f_std": self.macro_f_std,
            "macro_precision": self.macro_precision,
            "macro_recall": self.macro_recall,
            "runs": [
                {
                    "confusion": r.confusion.tolist(),
                    "macro_precision_recall_f": list(r.macro),
                    "per_class": {k: list(v) for k, v in class_scores(r.confusion).items()},
                    "n_train": int(len(r.train_idx)),
                    "n_test": int(len(r.test_idx)),
                    "seconds": round(r.seconds, 4),
                }
                for r in self.runs
            ],
            **self.meta,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=1, sort_keys=True)

    def summary_line(self) -> str:
        secs = sum(r.seconds for r in self.runs)
        return (f"{self.name:<28} dim={self.dim:<6} F={self.macro_f:6.2f}±{self.macro_f_std:4.2f} "
                f"P={self.macro_precision:6.2f} R={self.macro_recall:6.2f} time={secs:.1f}s")


def kfold_evaluate(X, y, plan: FoldPlan = FoldPlan(), hp: LinearHP = LinearHP(),
                   name: str = "") -> EvalReport:
    X = np.asarray(X, dtype=float)
    y = np.asarray(y).astype(int)
    if len(y) < plan.n_folds:
        raise ValueError(f"need at least {plan.n_folds} examples")
    runs = []
    score_sum = np.zeros(len(y))
    score_cnt = np.zeros(len(y))
    for train, test in plan.runs(y):
        if len(np.unique(y[train])) < 2 or len(test) == 0:
            raise ValueError("degenerate stratification: a run lacks a class or a test set")
        t0 = time.perf_counter()
        model = train_linear(X[train], y[train], hp)
        s = model.decision_function(X[test])
        cm = confusion(y[test], (s > 0).astype(int))
        runs.append(RunResult(cm, train, test, s, time.perf_counter() - t0))
        score_sum[test] += s
        score_cnt[test] += 1
    scores = np.divide(score_sum, score_cnt, out=np.zeros_like(score_sum), where=score_cnt > 0)
    return EvalReport(runs, scores, X.shape[1], name)


# -- fusion --------------------------------------------------------------------

def _align(ids_a: Sequence[str], ids_b: Sequence[str]):
    sa, sb = set(ids_a), set(ids_b)
    if sa != sb:
        missing = sorted(sa ^ sb)
        raise ValueError(f"example ids differ between inputs: {', '.join(missing)}")
    index_b = {g: i for i, g in enumerate(ids_b)}
    return [index_b[g] for g in ids_a]


def fuse(rep_a, rep_b, scores_a=None, scores_b=None, strategy: str = "early",
         ids_a: Sequence[str] | None = None, ids_b: Sequence[str] | None = None) -> np.ndarray:
    """Fused feature matrix in the row order of ``rep_a``.

    ``scores_*`` must be out-of-training-fold decision scores (e.g.
    ``EvalReport.scores``). When ids are given, ``rep_b``/``scores_b`` rows are
    reordered to match ``ids_a``.
    """
    if strategy not in FUSION_STRATEGIES:
        raise ValueError(f"unknown fusion strategy {strategy!r}; valid: {FUSION_STRATEGIES}")
    A = np.asarray(rep_a, dtype=float)
    B = np.asarray(rep_b, dtype=float)
    order = None
    if ids_a is not None and ids_b is not None:
        order = _align(ids_a, ids_b)
        B = B[order]
    if A.shape[0] != B.shape[0]:
        raise ValueError("representations have different numbers of rows")
    if strategy == "early":
        return np.hstack([A, B])
    if scores_a is None or scores_b is None:
        raise ValueError(f"{strategy} fusion needs the scores of both base classifiers")
    sa = np.asarray(scores_a, dtype=float)
    sb = np.asarray(scores_b, dtype=float)
    if order is not None:
        sb = sb[order]
    S = np.column_stack([sa, sb])
    return S if strategy == "late" else np.hstack([A, B, S])


def fusion_evaluate(rep_a, rep_b, y, strategy: str, plan: FoldPlan = FoldPlan(),
                    hp: LinearHP = LinearHP(), reports=None, name: str = "") -> EvalReport:
    """Evaluate one fusion strategy; base reports are computed when not given."""
    if reports is None and strategy != "early":
        reports = (kfold_evaluate(rep_a, y, plan, hp), kfold_evaluate(rep_b, y, plan, hp))
    sa, sb = (reports[0].scores, reports[1].scores) if reports else (None, None)
    X = fuse(rep_a, rep_b, sa, sb, strategy)
    return kfold_evaluate(X, y, plan, hp, name or f"{strategy} fusion")
