"""Word vectors and cluster ids for the context-cluster features.

Vectors come either from a text embedding file or from the built-in
skip-gram trainer (negative sampling, plain SGD). K-means over the vectors
yields the word -> cluster-id map; out-of-vocabulary words and window
padding share a single sentinel id equal to k.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np


class EmbeddingError(Exception):
    pass


@dataclass
class EmbeddingTable:
    dimension: int
    entries: dict[str, np.ndarray]

    def __len__(self) -> int:
        return len(self.entries)

    def words(self) -> list[str]:
        return list(self.entries)

    def matrix(self) -> np.ndarray:
        if not self.entries:
            return np.zeros((0, self.dimension))
        return np.stack([self.entries[w] for w in self.entries])


@dataclass
class ClusterModel:
    k: int
    centroids: np.ndarray  # (k, dim)
    assignment: dict[str, int]

    @property
    def oov_id(self) -> int:
        return self.k

    def to_json(self) -> dict:
        return {
            "k": self.k,
            "oov_id": self.oov_id,
            "assignment": dict(sorted(self.assignment.items())),
            "centroids": [[float(x) for x in row] for row in self.centroids],
        }

    @classmethod
    def from_json(cls, data: dict) -> "ClusterModel":
        model = cls(
            k=int(data["k"]),
            centroids=np.asarray(data["centroids"], dtype=float),
            assignment={w: int(c) for w, c in data["assignment"].items()},
        )
        if any(c >= model.k or c < 0 for c in model.assignment.values()):
            raise EmbeddingError("cluster id out of range in model file")
        return model


def cluster_of(model: ClusterModel, word: str) -> int:
    """Cluster id of a word; the sentinel id k for anything unassigned."""
    return model.assignment.get(word.lower(), model.oov_id)


def load_embeddings(path) -> EmbeddingTable:
    """Read the textual format: a "<vocab> <dim>" header, then one word and
    <dim> floats per line. Duplicate words keep the last entry (warned)."""
    import sys

    entries: dict[str, np.ndarray] = {}
    with open(path, encoding="utf-8") as fh:
        header = fh.readline().split()
        if len(header) != 2:
            raise EmbeddingError(f"{path}:1: malformed header")
        declared, dimension = int(header[0]), int(header[1])
        for lineno, line in enumerate(fh, start=2):
            parts = line.rstrip("\n").split()
            if not parts:
                continue
            word, values = parts[0], parts[1:]
            if len(values) != dimension:
                raise EmbeddingError(
                    f"{path}:{lineno}: expected {dimension} values, got {len(values)}"
                )
            if word in entries:
                print(f"{path}:{lineno}: duplicate word {word!r}, keeping last",
                      file=sys.stderr)
            entries[word] = np.array([float(v) for v in values])
    if declared != len(entries):
        print(f"{path}: header declares {declared} words, file has {len(entries)}",
              file=sys.stderr)
    return EmbeddingTable(dimension=dimension, entries=entries)


def save_embeddings(table: EmbeddingTable, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(f"{len(table.entries)} {table.dimension}\n")
        for word, vec in table.entries.items():
            fh.write(word + " " + " ".join(repr(float(x)) for x in vec) + "\n")


def sgns_loss(center: np.ndarray, context: np.ndarray, negatives: np.ndarray) -> float:
    """Negative-sampling loss for one (center, context, negatives) triple:
    -log s(u_ctx . v_c) - sum_neg log s(-u_neg . v_c)."""
    pos = _log_sigmoid(float(context @ center))
    neg = sum(_log_sigmoid(-float(u @ center)) for u in negatives)
    return -(pos + neg)


def sgns_gradients(center: np.ndarray, context: np.ndarray, negatives: np.ndarray):
    """Analytic gradients of sgns_loss w.r.t. (center, context, negatives)."""
    g_center = -(1.0 - _sigmoid(float(context @ center))) * context
    g_context = -(1.0 - _sigmoid(float(context @ center))) * center
    g_negatives = np.empty_like(negatives)
    for i, u in enumerate(negatives):
        s = _sigmoid(-float(u @ center))
        g_center = g_center + (1.0 - s) * u
        g_negatives[i] = (1.0 - s) * center
    return g_center, g_context, g_negatives


def _sigmoid(x: float) -> float:
    if x >= 0:
        return 1.0 / (1.0 + np.exp(-x))
    e = np.exp(x)
    return e / (1.0 + e)


def _log_sigmoid(x: float) -> float:
    # log(1/(1+e^-x)) computed without overflow
    if x >= 0:
        return -np.log1p(np.exp(-x))
    return x - np.log1p(np.exp(x))


def train_skipgram(
    sentences,
    dimension: int = 100,
    window: int = 5,
    negatives: int = 5,
    epochs: int = 5,
    seed: int = 0,
    min_count: int = 1,
    learning_rate: float = 0.025,
) -> EmbeddingTable:
    """Skip-gram with negative sampling over lowercase token sequences.

    Deterministic for a fixed seed: the corpus is visited in order and all
    sampling comes from one generator. Built for desk-scale corpora; load a
    pretrained file for anything large.
    """
    sentences = [list(s) for s in sentences]
    counts: dict[str, int] = {}
    for sent in sentences:
        for w in sent:
            counts[w] = counts.get(w, 0) + 1
    vocab = [w for w, c in counts.items() if c >= min_count]
    if not vocab:
        raise EmbeddingError("empty corpus")
    if dimension < 2:
        raise EmbeddingError("dimension must be >= 2")
    index = {w: i for i, w in enumerate(vocab)}

    rng = np.random.default_rng(seed)
    vec_in = (rng.random((len(vocab), dimension)) - 0.5) / dimension
    vec_out = np.zeros((len(vocab), dimension))

    freq = np.array([counts[w] for w in vocab], dtype=float) ** 0.75
    noise_cdf = np.cumsum(freq / freq.sum())

    encoded = [[index[w] for w in sent if w in index] for sent in sentences]
    total_steps = max(1, epochs * sum(len(s) for s in encoded))
    step = 0
    for _epoch in range(epochs):
        for sent in encoded:
            for pos, center in enumerate(sent):
                lr = learning_rate * max(0.05, 1.0 - step / total_steps)
                step += 1
                span = int(rng.integers(1, window + 1))
                lo = max(0, pos - span)
                hi = min(len(sent), pos + span + 1)
                for cpos in range(lo, hi):
                    if cpos == pos:
                        continue
                    ctx = sent[cpos]
                    neg = np.searchsorted(noise_cdf, rng.random(negatives))
                    _sgd_step(vec_in, vec_out, center, ctx, neg, lr)

    entries = {w: vec_in[i].copy() for w, i in index.items()}
    return EmbeddingTable(dimension=dimension, entries=entries)


def _sgd_step(vec_in, vec_out, center, ctx, neg, lr):
    v = vec_in[center]
    targets = np.concatenate(([ctx], neg))
    labels = np.zeros(len(targets))
    labels[0] = 1.0
    u = vec_out[targets]
    scores = u @ v
    preds = 1.0 / (1.0 + np.exp(-np.clip(scores, -60, 60)))
    errs = preds - labels  # d loss / d score
    grad_v = errs @ u
    vec_out[targets] -= lr * np.outer(errs, v)
    vec_in[center] -= lr * grad_v


def kmeans(
    table: EmbeddingTable,
    k: int = 500,
    seed: int = 0,
    max_iters: int = 100,
    tol: float = 1e-6,
    normalize: bool = False,
    sse_history: list | None = None,
) -> ClusterModel:
    """Lloyd's algorithm from k-means++ seeds over the embedding vectors.

    Within-cluster SSE is checked to be non-increasing every iteration
    (pass sse_history to capture the trajectory); nearest-centroid ties go
    to the lowest cluster id.
    """
    words = table.words()
    if not words:
        raise EmbeddingError("empty embedding table")
    if k > len(words):
        raise EmbeddingError(f"k={k} exceeds vocabulary size {len(words)}")
    x = np.stack([table.entries[w] for w in words]).astype(float)
    if normalize:
        norms = np.linalg.norm(x, axis=1, keepdims=True)
        x = x / np.where(norms == 0, 1.0, norms)

    rng = np.random.default_rng(seed)
    centroids = _kmeanspp_init(x, k, rng)
    prev_sse = np.inf
    for _ in range(max_iters):
        labels, sse = _assign(x, centroids)
        if sse > prev_sse + 1e-9:
            raise AssertionError("k-means SSE increased")
        if sse_history is not None:
            sse_history.append(sse)
        prev_sse = sse
        new_centroids = centroids.copy()
        taken: set[int] = set()
        point_d2 = ((x - centroids[labels]) ** 2).sum(axis=1)
        for c in range(k):
            members = x[labels == c]
            if len(members):
                new_centroids[c] = members.mean(axis=0)
            else:
                # adopt the point currently farthest from its centroid
                order = np.argsort(-point_d2)
                far = next(int(i) for i in order if int(i) not in taken)
                taken.add(far)
                new_centroids[c] = x[far]
                labels[far] = c
        shift = float(np.max(np.linalg.norm(new_centroids - centroids, axis=1)))
        centroids = new_centroids
        if shift < tol:
            break
    labels, _ = _assign(x, centroids)
    assignment = {w: int(c) for w, c in zip(words, labels)}
    return ClusterModel(k=k, centroids=centroids, assignment=assignment)


def _kmeanspp_init(x: np.ndarray, k: int, rng) -> np.ndarray:
    n = len(x)
    first = int(rng.integers(n))
    centroids = [x[first]]
    d2 = ((x - x[first]) ** 2).sum(axis=1)
    for _ in range(1, k):
        total = d2.sum()
        if total <= 0:
            idx = int(rng.integers(n))
        else:
            idx = int(rng.choice(n, p=d2 / total))
        centroids.append(x[idx])
        d2 = np.minimum(d2, ((x - x[idx]) ** 2).sum(axis=1))
    return np.stack(centroids)


def _assign(x: np.ndarray, centroids: np.ndarray):
    # ||x-c||^2 via the expansion to keep memory at O(n*k);
    # argmin breaks ties toward the lowest cluster id
    d2 = (
        (x * x).sum(axis=1)[:, None]
        + (centroids * centroids).sum(axis=1)[None, :]
        - 2.0 * (x @ centroids.T)
    )
    np.maximum(d2, 0.0, out=d2)
    labels = np.argmin(d2, axis=1)
    sse = float(d2[np.arange(len(x)), labels].sum())
    return labels, sse


def save_clusters(model: ClusterModel, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(model.to_json(), fh, sort_keys=True)
        fh.write("\n")


def load_clusters(path) -> ClusterModel:
    with open(path, encoding="utf-8") as fh:
        return ClusterModel.from_json(json.load(fh))
