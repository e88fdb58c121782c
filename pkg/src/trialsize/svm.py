"""Binary RBF-kernel SVM trained with SMO, calibrated with a Platt sigmoid.

The dual problem  min_a 0.5 a'Qa - e'a,  0 <= a_i <= C_i,  y'a = 0
(Q_ij = y_i y_j K_ij) is solved by sequential minimal optimization with
second-order working-pair selection. Grid search scores each (C, gamma)
cell by abstract-level decoding accuracy: per abstract, the candidate with
the highest calibrated probability wins, and nothing else counts.
"""

from __future__ import annotations

import hashlib
import json
from collections import OrderedDict
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from . import candidates as cand_mod
from . import features as feat_mod
from .corpus import Abstract
from .embeddings import ClusterModel
from .features import FeatureVector, FeatureVocabulary, Lexicons

MODEL_FORMAT_VERSION = 1
_TAU = 1e-12


class SvmError(Exception):
    pass


class ModelError(Exception):
    pass


@dataclass(frozen=True)
class KernelParams:
    cost: float
    gamma: float

    def __post_init__(self):
        if self.cost <= 0 or self.gamma <= 0:
            raise ValueError("cost and gamma must be positive")


@dataclass(frozen=True)
class GridSpec:
    cost_values: tuple[float, ...]
    gamma_values: tuple[float, ...]

    def __post_init__(self):
        if not self.cost_values or not self.gamma_values:
            raise ValueError("grid must have at least one cost and one gamma")

    @classmethod
    def default(cls) -> "GridSpec":
        return cls(
            cost_values=tuple(2.0**e for e in range(-5, 16, 2)),
            gamma_values=tuple(2.0**e for e in range(-15, 4, 2)),
        )

    def cells(self):
        for c in sorted(self.cost_values):
            for g in sorted(self.gamma_values):
                yield KernelParams(cost=c, gamma=g)


def rbf(x: FeatureVector, y: FeatureVector, gamma: float) -> float:
    """exp(-gamma * ||x - y||^2) over the sparse union of indices."""
    if gamma <= 0:
        raise ValueError("gamma must be positive")
    d2 = 0.0
    for idx, value in x.entries.items():
        d2 += (value - y.entries.get(idx, 0.0)) ** 2
    for idx, value in y.entries.items():
        if idx not in x.entries:
            d2 += value * value
    return float(np.exp(-gamma * d2))


def stack_vectors(vectors, n_features: int) -> sp.csr_matrix:
    vectors = list(vectors)
    rows, cols, data = [], [], []
    for r, vec in enumerate(vectors):
        for idx, value in vec.entries.items():
            rows.append(r)
            cols.append(idx)
            data.append(value)
    return sp.csr_matrix(
        (data, (rows, cols)), shape=(len(vectors), n_features)
    )


def rbf_matrix(a: sp.csr_matrix, b: sp.csr_matrix, gamma: float) -> np.ndarray:
    """Pairwise RBF kernel between the rows of two sparse matrices."""
    a_sq = np.asarray(a.multiply(a).sum(axis=1)).ravel()
    b_sq = np.asarray(b.multiply(b).sum(axis=1)).ravel()
    d2 = a_sq[:, None] + b_sq[None, :] - 2.0 * (a @ b.T).toarray()
    np.maximum(d2, 0.0, out=d2)
    return np.exp(-gamma * d2)


class _KernelCache:
    """RBF kernel rows computed on demand under a fixed memory budget.

    Values are identical whether or not a row is cached, so the cache can
    never change training results, only their speed.
    """

    def __init__(self, x: sp.csr_matrix, gamma: float, cache_mb: float = 256.0):
        self.x = x
        self.gamma = gamma
        self.sq = np.asarray(x.multiply(x).sum(axis=1)).ravel()
        n = x.shape[0]
        self.max_rows = max(2, int(cache_mb * 1e6 / (8 * max(1, n))))
        self._rows: OrderedDict[int, np.ndarray] = OrderedDict()

    def row(self, i: int) -> np.ndarray:
        cached = self._rows.get(i)
        if cached is not None:
            self._rows.move_to_end(i)
            return cached
        xi = self.x.getrow(i)
        d2 = self.sq + self.sq[i] - 2.0 * np.asarray((self.x @ xi.T).todense()).ravel()
        np.maximum(d2, 0.0, out=d2)
        row = np.exp(-self.gamma * d2)
        self._rows[i] = row
        if len(self._rows) > self.max_rows:
            self._rows.popitem(last=False)
        return row


@dataclass
class SmoResult:
    alpha: np.ndarray
    labels: np.ndarray  # +-1 floats
    gradient: np.ndarray  # G = Q alpha - e at the solution
    bias: float
    objective: float  # dual minimization objective 0.5 a'Qa - e'a
    iterations: int
    converged: bool
    params: KernelParams
    box: np.ndarray  # per-point upper bound C_i

    @property
    def support_indices(self) -> np.ndarray:
        return np.flatnonzero(self.alpha > 0)

    def decision_values(self) -> np.ndarray:
        """f(x_i) on the training points, recovered from the gradient."""
        return self.labels * (self.gradient + 1.0) + self.bias


def train_smo(
    vectors,
    labels,
    params: KernelParams,
    tol: float = 1e-3,
    max_passes: int | None = None,
    cache_mb: float = 256.0,
    positive_weight: float = 1.0,
) -> SmoResult:
    """Solve the dual with SMO (second-order working-pair selection).

    The dual objective is asserted non-increasing at every accepted update;
    the working-pair rule is deterministic, so equal inputs give equal
    models. positive_weight scales the box C for positive examples.
    """
    if sp.issparse(vectors):
        x = vectors.tocsr()
    else:
        dim = 1 + max(
            (max(v.entries) for v in vectors if v.entries), default=0
        )
        x = stack_vectors(vectors, dim)
    y = np.asarray(labels, dtype=float)
    n = x.shape[0]
    if n != len(y):
        raise ValueError("vectors and labels disagree in length")
    if not (np.any(y > 0) and np.any(y < 0)):
        raise SvmError("training data must contain both classes")
    box = np.where(y > 0, params.cost * positive_weight, params.cost)
    if max_passes is None:
        max_passes = max(20_000, 60 * n)

    kernel = _KernelCache(x, params.gamma, cache_mb)
    alpha = np.zeros(n)
    grad = -np.ones(n)
    objective = 0.0
    iterations = 0
    converged = False

    while iterations < max_passes:
        minus_yg = -y * grad
        up = ((y > 0) & (alpha < box - _TAU)) | ((y < 0) & (alpha > _TAU))
        low = ((y > 0) & (alpha > _TAU)) | ((y < 0) & (alpha < box - _TAU))
        if not up.any() or not low.any():
            converged = True
            break
        i = int(np.flatnonzero(up)[np.argmax(minus_yg[up])])
        m_val = minus_yg[i]
        m_low = float(np.min(minus_yg[low]))
        if m_val - m_low <= tol:
            converged = True
            break

        ki = kernel.row(i)
        cand = low & (minus_yg < m_val)
        idx = np.flatnonzero(cand)
        a_it = np.maximum(2.0 - 2.0 * ki[idx], _TAU)  # K_ii = K_tt = 1 for RBF
        b_it = m_val - minus_yg[idx]
        j = int(idx[np.argmin(-(b_it * b_it) / a_it)])
        kj = kernel.row(j)

        old_i, old_j = alpha[i], alpha[j]
        _update_pair(alpha, grad, y, box, i, j, float(ki[j]))
        d_ai, d_aj = alpha[i] - old_i, alpha[j] - old_j
        grad += y * (y[i] * d_ai * ki + y[j] * d_aj * kj)
        iterations += 1

        new_objective = 0.5 * float(alpha @ (grad - 1.0))
        if new_objective > objective + 1e-9 * max(1.0, abs(objective)):
            raise AssertionError("SMO dual objective increased")
        objective = new_objective

    bias = _compute_bias(alpha, grad, y, box)
    return SmoResult(
        alpha=alpha, labels=y, gradient=grad, bias=bias, objective=objective,
        iterations=iterations, converged=converged, params=params, box=box,
    )


def _update_pair(alpha, grad, y, box, i, j, k_ij):
    ci, cj = box[i], box[j]
    quad = max(2.0 - 2.0 * k_ij, _TAU)
    if y[i] != y[j]:
        delta = (-grad[i] - grad[j]) / quad
        diff = alpha[i] - alpha[j]
        alpha[i] += delta
        alpha[j] += delta
        if diff > 0:
            if alpha[j] < 0:
                alpha[j] = 0.0
                alpha[i] = diff
        else:
            if alpha[i] < 0:
                alpha[i] = 0.0
                alpha[j] = -diff
        if diff > ci - cj:
            if alpha[i] > ci:
                alpha[i] = ci
                alpha[j] = ci - diff
        else:
            if alpha[j] > cj:
                alpha[j] = cj
                alpha[i] = cj + diff
    else:
        delta = (grad[i] - grad[j]) / quad
        total = alpha[i] + alpha[j]
        alpha[i] -= delta
        alpha[j] += delta
        if total > ci:
            if alpha[i] > ci:
                alpha[i] = ci
                alpha[j] = total - ci
        else:
            if alpha[j] < 0:
                alpha[j] = 0.0
                alpha[i] = total
        if total > cj:
            if alpha[j] > cj:
                alpha[j] = cj
                alpha[i] = total - cj
        else:
            if alpha[i] < 0:
                alpha[i] = 0.0
                alpha[j] = total


def _compute_bias(alpha, grad, y, box) -> float:
    yg = y * grad
    free = (alpha > _TAU) & (alpha < box - _TAU)
    if free.any():
        return -float(np.mean(yg[free]))
    upper = alpha >= box - _TAU
    lower = alpha <= _TAU
    ub_mask = (upper & (y < 0)) | (lower & (y > 0))
    lb_mask = (upper & (y > 0)) | (lower & (y < 0))
    ub = float(np.min(yg[ub_mask])) if ub_mask.any() else 0.0
    lb = float(np.max(yg[lb_mask])) if lb_mask.any() else 0.0
    return -(ub + lb) / 2.0


def kkt_max_violation(result: SmoResult) -> float:
    """Largest KKT violation over the training points.

    a=0 needs y f >= 1, a=C needs y f <= 1, free needs y f = 1; returns the
    worst margin shortfall, 0 for a perfectly consistent solution.
    """
    y_f = result.labels * result.decision_values()
    worst = 0.0
    for a, c, yf in zip(result.alpha, result.box, y_f):
        if a <= _TAU:
            worst = max(worst, 1.0 - yf)
        elif a >= c - _TAU:
            worst = max(worst, yf - 1.0)
        else:
            worst = max(worst, abs(yf - 1.0))
    return worst


def platt_fit(decision_values, labels, max_iter: int = 100, grad_tol: float = 1e-8):
    """Fit (A, B) of p = 1/(1+exp(A f + B)) by regularized maximum likelihood.

    Targets are the smoothed (N+ + 1)/(N+ + 2) and 1/(N- + 2); Newton steps
    with backtracking run until the gradient norm drops below grad_tol.
    """
    f = np.asarray(decision_values, dtype=float)
    y = np.asarray(labels)
    if not np.all(np.isfinite(f)):
        raise ValueError("decision values must be finite")
    n_pos = int((y > 0).sum())
    n_neg = len(y) - n_pos
    if n_pos == 0 or n_neg == 0:
        raise ValueError("both classes required to fit the sigmoid")
    t = np.where(y > 0, (n_pos + 1.0) / (n_pos + 2.0), 1.0 / (n_neg + 2.0))

    def nll(a, b):
        z = a * f + b
        pos = z >= 0
        out = np.empty_like(z)
        out[pos] = t[pos] * z[pos] + np.log1p(np.exp(-z[pos]))
        out[~pos] = (t[~pos] - 1.0) * z[~pos] + np.log1p(np.exp(z[~pos]))
        return float(out.sum())

    a_cur, b_cur = 0.0, float(np.log((n_neg + 1.0) / (n_pos + 1.0)))
    value = nll(a_cur, b_cur)
    sigma = 1e-12
    for _ in range(max_iter):
        z = a_cur * f + b_cur
        p = _stable_sigmoid(-z)
        resid = t - p
        g = np.array([float(f @ resid), float(resid.sum())])
        if np.linalg.norm(g) < grad_tol:
            break
        w = p * (1.0 - p)
        h = np.array(
            [
                [float(f @ (w * f)) + sigma, float(f @ w)],
                [float(f @ w), float(w.sum()) + sigma],
            ]
        )
        step = np.linalg.solve(h, -g)
        scale = 1.0
        decrement = float(g @ step)
        while scale >= 1e-10:
            trial = nll(a_cur + scale * step[0], b_cur + scale * step[1])
            if trial <= value + 1e-4 * scale * decrement:
                break
            scale /= 2.0
        a_cur += scale * step[0]
        b_cur += scale * step[1]
        value = nll(a_cur, b_cur)
    return float(a_cur), float(b_cur)


def platt_gradient(a, b, decision_values, labels) -> np.ndarray:
    """Analytic gradient of the calibration loss at (a, b)."""
    f = np.asarray(decision_values, dtype=float)
    y = np.asarray(labels)
    n_pos = int((y > 0).sum())
    n_neg = len(y) - n_pos
    t = np.where(y > 0, (n_pos + 1.0) / (n_pos + 2.0), 1.0 / (n_neg + 2.0))
    p = _stable_sigmoid(-(a * f + b))
    resid = t - p
    return np.array([float(f @ resid), float(resid.sum())])


def _stable_sigmoid(x):
    x = np.asarray(x, dtype=float)
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    e = np.exp(x[~pos])
    out[~pos] = e / (1.0 + e)
    return out


@dataclass
class SvmModel:
    """A trained, calibrated classifier carrying everything prediction needs:
    the frozen vocabulary, numeric scaling, lexicons, cluster model and the
    feature-group selection it was trained with."""

    params: KernelParams
    support_vectors: sp.csr_matrix
    dual_coefs: np.ndarray  # alpha_i * y_i over the support vectors
    bias: float
    platt_a: float
    platt_b: float
    vocabulary: FeatureVocabulary
    scaling: dict[str, tuple[float, float]]
    lexicons: Lexicons
    clusters: ClusterModel
    selection: tuple[str, ...] = feat_mod.ALL_GROUPS
    min_value: int = cand_mod.DEFAULT_MIN_VALUE

    def decision_values(self, x: sp.csr_matrix) -> np.ndarray:
        k = rbf_matrix(x, self.support_vectors, self.params.gamma)
        return k @ self.dual_coefs + self.bias

    def probabilities(self, x: sp.csr_matrix) -> np.ndarray:
        p = _stable_sigmoid(-(self.platt_a * self.decision_values(x) + self.platt_b))
        return np.clip(p, 1e-15, 1.0 - 1e-15)

    def vectorize_candidates(self, cands, abstract: Abstract) -> sp.csr_matrix:
        extract = feat_mod.feature_groups(self.selection)
        vectors = [
            feat_mod.vectorize(
                extract(c, abstract, self.clusters, self.lexicons),
                self.vocabulary,
                self.scaling,
            )
            for c in cands
        ]
        return stack_vectors(vectors, len(self.vocabulary))


def predict_probability(model: SvmModel, x: FeatureVector) -> float:
    """Calibrated probability for one already-vectorized candidate."""
    stacked = stack_vectors([x], len(model.vocabulary))
    return float(model.probabilities(stacked)[0])


def score_candidates(model: SvmModel, abstract: Abstract):
    """(candidate, probability) pairs in document order."""
    cands = cand_mod.extract_candidates(abstract, model.min_value)
    if not cands:
        return []
    probs = model.probabilities(model.vectorize_candidates(cands, abstract))
    return list(zip(cands, (float(p) for p in probs)))


# ---------------------------------------------------------------------------
# grid search over (C, gamma) with the abstract-level argmax objective
# ---------------------------------------------------------------------------


@dataclass
class _TrainingSet:
    vectors: sp.csr_matrix
    labels: np.ndarray
    slices: list[tuple[int, int]]  # candidate span per abstract
    golds: list[int]
    values: list[list[int]]  # candidate values per abstract
    vocabulary: FeatureVocabulary
    scaling: dict[str, tuple[float, float]]
    n_candidates: int = 0


def build_training_set(
    corpus,
    selection,
    clusters: ClusterModel,
    lexicons: Lexicons,
    min_value: int = cand_mod.DEFAULT_MIN_VALUE,
) -> _TrainingSet:
    """Extract, label and vectorize every candidate of a gold corpus with a
    fresh vocabulary, fitted scaling included."""
    extract = feat_mod.feature_groups(selection)
    named = []
    labels = []
    slices = []
    golds = []
    values = []
    for abstract in corpus:
        labeled = cand_mod.label_candidates(abstract, min_value)
        start = len(named)
        for lc in labeled:
            named.append(extract(lc.candidate, abstract, clusters, lexicons))
            labels.append(1.0 if lc.is_size else -1.0)
        slices.append((start, len(named)))
        golds.append(abstract.gold_size)
        values.append([lc.candidate.value for lc in labeled])
    if not named:
        raise SvmError("no abstract in the corpus produced any candidate")
    scaling = feat_mod.fit_scaling(named)
    vocab = FeatureVocabulary()
    vectors = [feat_mod.vectorize(f, vocab, scaling) for f in named]
    vocab.freeze()
    return _TrainingSet(
        vectors=stack_vectors(vectors, len(vocab)),
        labels=np.asarray(labels),
        slices=slices,
        golds=golds,
        values=values,
        vocabulary=vocab,
        scaling=scaling,
        n_candidates=len(named),
    )


def _fit_cell(ts: _TrainingSet, params: KernelParams, tol, max_passes, cache_mb, positive_weight):
    result = train_smo(
        ts.vectors, ts.labels, params,
        tol=tol, max_passes=max_passes, cache_mb=cache_mb,
        positive_weight=positive_weight,
    )
    decisions = result.decision_values()
    a, b = platt_fit(decisions, ts.labels)
    return result, a, b, decisions


def _cell_accuracy(ts: _TrainingSet, params, tol, max_passes, cache_mb, positive_weight) -> float:
    _, a, b, decisions = _fit_cell(ts, params, tol, max_passes, cache_mb, positive_weight)
    probs = _stable_sigmoid(-(a * decisions + b))
    correct = 0
    for (start, end), gold, vals in zip(ts.slices, ts.golds, ts.values):
        if end > start:
            winner = start + int(np.argmax(probs[start:end]))
            if vals[winner - start] == gold:
                correct += 1
    return correct / max(1, len(ts.slices))


def grid_search(
    corpus,
    grid: GridSpec,
    selection,
    clusters: ClusterModel,
    lexicons: Lexicons,
    min_value: int = cand_mod.DEFAULT_MIN_VALUE,
    tol: float = 1e-3,
    max_passes: int | None = None,
    cache_mb: float = 256.0,
    positive_weight: float = 1.0,
    jobs: int = 1,
):
    """Train at every grid cell, score by training-abstract decoding accuracy,
    and return (best params, model retrained at them, per-cell accuracies).

    Ties go to the smaller cost, then the smaller gamma.
    """
    ts = build_training_set(corpus, selection, clusters, lexicons, min_value)
    cells = list(grid.cells())

    def run(params):
        return _cell_accuracy(ts, params, tol, max_passes, cache_mb, positive_weight)

    if jobs > 1 and len(cells) > 1:
        from joblib import Parallel, delayed

        accuracies = Parallel(n_jobs=jobs)(delayed(run)(p) for p in cells)
    else:
        accuracies = [run(p) for p in cells]

    best_params, best_acc = None, -1.0
    for params, acc in zip(cells, accuracies):
        if acc > best_acc:
            best_params, best_acc = params, acc

    result, a, b, _ = _fit_cell(ts, best_params, tol, max_passes, cache_mb, positive_weight)
    sv = result.support_indices
    model = SvmModel(
        params=best_params,
        support_vectors=ts.vectors[sv],
        dual_coefs=result.alpha[sv] * result.labels[sv],
        bias=result.bias,
        platt_a=a,
        platt_b=b,
        vocabulary=ts.vocabulary,
        scaling=ts.scaling,
        lexicons=lexicons,
        clusters=clusters,
        selection=tuple(g for g in feat_mod.ALL_GROUPS if g in set(selection)),
        min_value=min_value,
    )
    stats = {
        "n_candidates": ts.n_candidates,
        "train_accuracy": best_acc,
        "cells": [
            {"cost": p.cost, "gamma": p.gamma, "accuracy": acc}
            for p, acc in zip(cells, accuracies)
        ],
    }
    return best_params, model, stats


# ---------------------------------------------------------------------------
# model persistence
# ---------------------------------------------------------------------------


def _cluster_digest(cluster_json: dict) -> str:
    canon = json.dumps(
        {"k": cluster_json["k"], "assignment": cluster_json["assignment"]},
        sort_keys=True,
    )
    return hashlib.sha256(canon.encode()).hexdigest()


def save_model(model: SvmModel, path) -> None:
    dense = model.support_vectors
    sv_entries = []
    for r in range(dense.shape[0]):
        row = dense.getrow(r)
        sv_entries.append(
            {str(int(i)): float(v) for i, v in sorted(zip(row.indices, row.data))}
        )
    clusters_json = model.clusters.to_json()
    payload = {
        "format_version": MODEL_FORMAT_VERSION,
        "kind": "trial-size-svm",
        "params": {"cost": model.params.cost, "gamma": model.params.gamma},
        "bias": model.bias,
        "platt_a": model.platt_a,
        "platt_b": model.platt_b,
        "n_features": len(model.vocabulary),
        "support_vectors": sv_entries,
        "dual_coefs": [float(v) for v in model.dual_coefs],
        "vocabulary": model.vocabulary.index,
        "scaling": {k: [float(v[0]), float(v[1])] for k, v in sorted(model.scaling.items())},
        "lexicons": model.lexicons.to_json(),
        "clusters": clusters_json,
        "clusters_sha256": _cluster_digest(clusters_json),
        "feature_groups": list(model.selection),
        "candidate_min_value": model.min_value,
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, sort_keys=True)
        fh.write("\n")


def load_model(path) -> SvmModel:
    with open(path, encoding="utf-8") as fh:
        payload = json.load(fh)
    if payload.get("format_version") != MODEL_FORMAT_VERSION:
        raise ModelError(f"unsupported model format {payload.get('format_version')!r}")
    digest = _cluster_digest(payload["clusters"])
    if digest != payload.get("clusters_sha256"):
        raise ModelError("cluster model hash mismatch; refusing to run")
    n_features = int(payload["n_features"])
    vectors = [
        FeatureVector({int(i): float(v) for i, v in entry.items()})
        for entry in payload["support_vectors"]
    ]
    return SvmModel(
        params=KernelParams(**payload["params"]),
        support_vectors=stack_vectors(vectors, n_features),
        dual_coefs=np.asarray(payload["dual_coefs"], dtype=float),
        bias=float(payload["bias"]),
        platt_a=float(payload["platt_a"]),
        platt_b=float(payload["platt_b"]),
        vocabulary=FeatureVocabulary(
            {k: int(v) for k, v in payload["vocabulary"].items()}, frozen=True
        ),
        scaling={k: (float(v[0]), float(v[1])) for k, v in payload["scaling"].items()},
        lexicons=Lexicons.from_json(payload["lexicons"]),
        clusters=ClusterModel.from_json(payload["clusters"]),
        selection=tuple(payload["feature_groups"]),
        min_value=int(payload["candidate_min_value"]),
    )
