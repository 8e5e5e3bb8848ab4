"""Clustering, embedding and evaluation on top of an MVAG Laplacian."""

import logging
from typing import Dict, Iterable, Union

import numpy as np
import scipy.sparse as sp
from scipy.optimize import linear_sum_assignment
from sklearn.cluster import KMeans
from sklearn.metrics import adjusted_rand_score, normalized_mutual_info_score
from sklearn.metrics.cluster import contingency_matrix

from config import Config
from exceptions import EmptyGraph, InvalidParameter, LengthMismatch, TooLarge, ZeroVolume
from linalg import smallest_eigenvectors
from views import GraphView

logger = logging.getLogger(__name__)

_SUBSET_CHUNK = 1 << 14


def spectral_clustering(L: sp.spmatrix, k: int, seed: int = Config.SEED) -> np.ndarray:
    """k-means on the row-normalized bottom-k eigenvectors of ``L``."""
    if k < 2:
        raise InvalidParameter(f"spectral clustering needs k >= 2, got {k}")
    if k > L.shape[0]:
        raise InvalidParameter(f"cannot split {L.shape[0]} nodes into {k} clusters")
    _, vectors = smallest_eigenvectors(L, k, seed=seed)
    norms = np.linalg.norm(vectors, axis=1, keepdims=True)
    rows = np.divide(vectors, norms, out=np.zeros_like(vectors), where=norms > 0)
    # sklearn relocates empty clusters to the points farthest from their centers
    kmeans = KMeans(n_clusters=k, init="k-means++", n_init=Config.KMEANS_RESTARTS,
                    max_iter=Config.KMEANS_MAX_ITER, random_state=seed)
    labels = kmeans.fit_predict(rows)
    logger.info("Spectral clustering: n=%d, k=%d, inertia=%.4f", L.shape[0], k, kmeans.inertia_)
    return labels.astype(np.int64)


def spectral_embedding(L: sp.spmatrix, d: int = Config.EMBED_DIM, seed: int = Config.SEED) -> np.ndarray:
    """Eigenvectors of the d smallest nontrivial eigenvalues, one row per node."""
    n = L.shape[0]
    if not 1 <= d < n:
        raise InvalidParameter(f"embedding dimension must satisfy 1 <= d < n={n}, got {d}")
    _, vectors = smallest_eigenvectors(L, d + 1, seed=seed)
    return vectors[:, 1:]


def clustering_metrics(pred: Iterable[int], truth: Iterable[int]) -> Dict[str, float]:
    """Acc, matched macro-F1, NMI (arithmetic), ARI and purity."""
    pred = np.asarray(list(pred), dtype=np.int64)
    truth = np.asarray(list(truth), dtype=np.int64)
    if len(pred) != len(truth):
        raise LengthMismatch(f"{len(pred)} predicted labels but {len(truth)} true labels")
    if len(truth) == 0:
        raise InvalidParameter("cannot score an empty labelling")
    n = len(truth)

    # rows: true classes, columns: predicted clusters
    table = contingency_matrix(truth, pred)
    rows, cols = linear_sum_assignment(-table)
    matched = table[rows, cols]
    acc = matched.sum() / n

    class_sizes = table.sum(axis=1)
    cluster_sizes = table.sum(axis=0)
    f1 = np.zeros(table.shape[0])
    precision = matched / cluster_sizes[cols]
    recall = matched / class_sizes[rows]
    with np.errstate(invalid="ignore", divide="ignore"):
        scores = np.where(matched > 0, 2 * precision * recall / (precision + recall), 0.0)
    f1[rows] = scores

    return {
        "acc": float(acc),
        "f1": float(f1.mean()),
        "nmi": float(normalized_mutual_info_score(truth, pred, average_method="arithmetic")),
        "ari": float(adjusted_rand_score(truth, pred)),
        "purity": float(table.max(axis=0).sum() / n),
    }


def _as_mask(n: int, subset: Union[Iterable[int], np.ndarray]) -> np.ndarray:
    subset = np.asarray(list(subset) if not isinstance(subset, np.ndarray) else subset)
    if subset.dtype == bool:
        if len(subset) != n:
            raise LengthMismatch(f"mask has length {len(subset)}, graph has {n} nodes")
        return subset
    mask = np.zeros(n, dtype=bool)
    mask[subset.astype(np.int64)] = True
    return mask


def normalized_cut(g: GraphView, C) -> float:
    """cut(C) / vol(C)."""
    mask = _as_mask(g.n, C)
    if not mask.any():
        raise InvalidParameter("normalized cut needs a nonempty node subset")
    adj = g.adjacency
    degrees = np.asarray(adj.sum(axis=1)).ravel()
    volume = degrees[mask].sum()
    if volume <= 0:
        raise ZeroVolume("node subset has zero volume")
    inside = np.asarray(adj[mask][:, mask].sum())
    return float((volume - inside) / volume)


def conductance_bruteforce(g: GraphView) -> float:
    """Minimum normalized cut over nonempty subsets holding at most half the volume."""
    n = g.n
    if n > Config.CONDUCTANCE_MAX_NODES:
        raise TooLarge(f"brute-force conductance supports n <= {Config.CONDUCTANCE_MAX_NODES}, got {n}")
    upper = sp.triu(g.adjacency, k=1).tocoo()
    degrees = np.asarray(g.adjacency.sum(axis=1)).ravel()
    total = degrees.sum()
    if total <= 0:
        raise EmptyGraph("graph has no edges")

    best = np.inf
    bits = np.arange(n)
    for start in range(1, 1 << n, _SUBSET_CHUNK):
        codes = np.arange(start, min(start + _SUBSET_CHUNK, 1 << n))
        masks = ((codes[:, None] >> bits) & 1).astype(bool)
        volumes = masks.astype(float) @ degrees
        cuts = (masks[:, upper.row] != masks[:, upper.col]).astype(float) @ upper.data
        valid = (volumes > 0) & (volumes <= total / 2)
        if valid.any():
            best = min(best, float(np.min(cuts[valid] / volumes[valid])))
    return best
