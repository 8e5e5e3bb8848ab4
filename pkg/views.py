"""Graph views, attribute views and their normalized Laplacians.

An MVAG is one node set seen through ``p`` graph views (weighted simple
graphs) and ``q`` attribute views (dense feature matrices).  Every view is
turned into a normalized Laplacian; attribute views go through a cosine
KNN graph first.  View order is graph views first, then attribute views,
and that order is the weight order used everywhere else.
"""

import logging
from dataclasses import dataclass, field
from typing import Iterable, List, Optional, Sequence, Tuple

import numpy as np
import scipy.sparse as sp

from config import Config
from exceptions import DimensionMismatch, InvalidParameter

logger = logging.getLogger(__name__)

# Rows per block when forming cosine similarities, keeps memory at O(block * n)
_KNN_BLOCK = 1024


@dataclass(frozen=True)
class GraphView:
    """Weighted simple graph over ``n`` nodes, stored as a symmetric CSR adjacency."""

    adjacency: sp.csr_matrix
    zero_norm_rows: int = 0

    def __post_init__(self):
        adj = self.adjacency
        if adj.shape[0] != adj.shape[1]:
            raise DimensionMismatch(f"adjacency must be square, got {adj.shape}")
        if adj.nnz and np.any(adj.data <= 0):
            raise InvalidParameter("graph edge weights must be positive")
        if adj.diagonal().any():
            raise InvalidParameter("graph views must not contain self-loops")
        if (adj != adj.T).nnz:
            raise InvalidParameter("graph adjacency must be exactly symmetric")

    @property
    def n(self) -> int:
        return self.adjacency.shape[0]

    @classmethod
    def from_edges(cls, n: int, edges: Iterable[Tuple[int, int]],
                   weights: Optional[Sequence[float]] = None) -> "GraphView":
        """Build an undirected graph from an edge list (each edge listed once)."""
        edges = list(edges)
        if weights is None:
            weights = [1.0] * len(edges)
        rows = [a for a, _ in edges] + [b for _, b in edges]
        cols = [b for _, b in edges] + [a for a, _ in edges]
        vals = list(weights) + list(weights)
        adj = sp.coo_matrix((np.asarray(vals, dtype=float), (rows, cols)), shape=(n, n))
        return cls(canonical_csr(adj))


@dataclass(frozen=True)
class AttributeView:
    """Dense ``n x d`` attribute matrix of one attribute view."""

    values: np.ndarray

    def __post_init__(self):
        if self.values.ndim != 2:
            raise DimensionMismatch(f"attribute view must be 2-D, got shape {self.values.shape}")
        if not np.all(np.isfinite(self.values)):
            raise InvalidParameter("attribute values must be finite")

    @property
    def n(self) -> int:
        return self.values.shape[0]

    @property
    def d(self) -> int:
        return self.values.shape[1]


@dataclass(frozen=True)
class ViewLaplacian:
    """Normalized Laplacian of one view; ``source`` is ("graph" | "attribute", index)."""

    matrix: sp.csr_matrix
    source: Tuple[str, int]
    adjacency: Optional[sp.csr_matrix] = None

    @property
    def n(self) -> int:
        return self.matrix.shape[0]


@dataclass
class MvagDataset:
    name: str
    k: int
    graph_views: List[GraphView] = field(default_factory=list)
    attribute_views: List[AttributeView] = field(default_factory=list)
    labels: Optional[np.ndarray] = None
    knn_overrides: List[Optional[int]] = field(default_factory=list)

    @property
    def p(self) -> int:
        return len(self.graph_views)

    @property
    def q(self) -> int:
        return len(self.attribute_views)

    @property
    def r(self) -> int:
        return self.p + self.q

    @property
    def n(self) -> int:
        views = list(self.graph_views) + list(self.attribute_views)
        if not views:
            raise InvalidParameter(f"dataset {self.name!r} has no views")
        return views[0].n

    def validate(self):
        """Check that all views and the labels agree on ``n``."""
        n = self.n
        for i, view in enumerate(self.graph_views):
            if view.n != n:
                raise DimensionMismatch(f"graph view {i} has {view.n} nodes, expected {n}")
        for j, view in enumerate(self.attribute_views):
            if view.n != n:
                raise DimensionMismatch(f"attribute view {j} has {view.n} nodes, expected {n}")
        if self.labels is not None:
            if len(self.labels) != n:
                raise DimensionMismatch(f"labels have length {len(self.labels)}, expected {n}")
            if len(self.labels) and (self.labels.min() < 0 or self.labels.max() >= self.k):
                raise InvalidParameter(f"labels must lie in [0, {self.k})")


def canonical_csr(matrix) -> sp.csr_matrix:
    """CSR copy with summed duplicates and strictly increasing column indices."""
    csr = sp.csr_matrix(matrix, dtype=float)
    csr.sum_duplicates()
    csr.sort_indices()
    return csr


def normalized_laplacian(g: GraphView) -> ViewLaplacian:
    """I - D^{-1/2} A D^{-1/2}, with D^{-1/2} = 0 on isolated nodes."""
    return ViewLaplacian(laplacian_from_adjacency(g.adjacency), ("graph", 0), g.adjacency)


def laplacian_from_adjacency(adjacency: sp.csr_matrix) -> sp.csr_matrix:
    n = adjacency.shape[0]
    degrees = np.asarray(adjacency.sum(axis=1)).ravel()
    inv_sqrt = np.zeros(n)
    positive = degrees > 0
    inv_sqrt[positive] = 1.0 / np.sqrt(degrees[positive])

    coo = adjacency.tocoo()
    # the scale factor is a product of two scalars, so (a, b) and (b, a) stay bit-identical
    scaled = -coo.data * (inv_sqrt[coo.row] * inv_sqrt[coo.col])
    diag = np.arange(n)
    rows = np.concatenate([coo.row, diag])
    cols = np.concatenate([coo.col, diag])
    vals = np.concatenate([scaled, np.ones(n)])
    return canonical_csr(sp.coo_matrix((vals, (rows, cols)), shape=(n, n)))


def knn_graph(x: AttributeView, K: int) -> GraphView:
    """Symmetric cosine KNN graph; ties at the K-th neighbor go to the lower node index."""
    n = x.n
    if K < 1 or K >= n:
        raise InvalidParameter(f"KNN size must satisfy 1 <= K < n, got K={K}, n={n}")

    values = np.asarray(x.values, dtype=float)
    norms = np.linalg.norm(values, axis=1)
    zero_rows = norms == 0
    unit = np.zeros_like(values)
    unit[~zero_rows] = values[~zero_rows] / norms[~zero_rows, None]
    if zero_rows.any():
        logger.warning("%d attribute rows have zero norm; those nodes get no KNN edges",
                       int(zero_rows.sum()))

    pairs = {}
    for start in range(0, n, _KNN_BLOCK):
        stop = min(start + _KNN_BLOCK, n)
        sims = unit[start:stop] @ unit.T
        sims[np.arange(stop - start), np.arange(start, stop)] = -np.inf
        # stable sort on the negated row keeps lower indices first among equal similarities
        order = np.argsort(-sims, axis=1, kind="stable")[:, :K]
        for offset, neighbours in enumerate(order):
            a = start + offset
            if zero_rows[a]:
                continue
            for b in neighbours:
                if sims[offset, b] > 0:
                    pairs[(min(a, b), max(a, b))] = None

    if not pairs:
        return GraphView(sp.csr_matrix((n, n)), int(zero_rows.sum()))

    lo = np.fromiter((a for a, _ in pairs), dtype=np.int64, count=len(pairs))
    hi = np.fromiter((b for _, b in pairs), dtype=np.int64, count=len(pairs))
    # one similarity per unordered pair, read from the lower row so both directions share it
    weights = np.einsum("ij,ij->i", unit[lo], unit[hi])
    keep = weights > 0
    lo, hi, weights = lo[keep], hi[keep], weights[keep]
    adj = sp.coo_matrix((np.concatenate([weights, weights]),
                         (np.concatenate([lo, hi]), np.concatenate([hi, lo]))), shape=(n, n))
    return GraphView(canonical_csr(adj), int(zero_rows.sum()))


def build_view_laplacians(ds: MvagDataset, K: Optional[int] = None) -> List[ViewLaplacian]:
    """Laplacians in view order: graph views first, then attribute views via KNN graphs."""
    ds.validate()
    K = Config.KNN_K if K is None else K
    laplacians = []
    for i, view in enumerate(ds.graph_views):
        laplacians.append(ViewLaplacian(laplacian_from_adjacency(view.adjacency), ("graph", i),
                                        view.adjacency))
    for j, view in enumerate(ds.attribute_views):
        override = ds.knn_overrides[j] if j < len(ds.knn_overrides) else None
        graph = knn_graph(view, override or K)
        laplacians.append(ViewLaplacian(laplacian_from_adjacency(graph.adjacency), ("attribute", j),
                                        graph.adjacency))
    logger.info("Built %d view Laplacians for %s (n=%d)", len(laplacians), ds.name, ds.n)
    return laplacians
