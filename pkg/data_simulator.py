import json
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Optional

import numpy as np
import scipy.sparse as sp

from exceptions import InvalidParameter, ParseError
from views import AttributeView, GraphView, MvagDataset, canonical_csr

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class SbmViewSpec:
    """One graph view: blocks outside ``informative`` are merged into a single community."""

    p_in: float
    p_out: float
    informative: List[int]


@dataclass(frozen=True)
class SbmAttributeSpec:
    """One attribute view: block-mean vectors plus Gaussian noise."""

    informative: List[int]
    noise: float = 0.5
    dim: int = 16
    knn_k: Optional[int] = None


@dataclass(frozen=True)
class SbmSpec:
    n: int
    k: int
    graph_views: List[SbmViewSpec] = field(default_factory=list)
    attribute_views: List[SbmAttributeSpec] = field(default_factory=list)
    seed: int = 42
    name: str = "sbm"

    @property
    def r(self) -> int:
        return len(self.graph_views) + len(self.attribute_views)

    def validate(self):
        if self.k < 1 or self.n < self.k:
            raise InvalidParameter(f"need 1 <= k <= n, got n={self.n}, k={self.k}")
        if self.r == 0:
            raise InvalidParameter("SBM spec needs at least one view")
        covered = set()
        for i, view in enumerate(self.graph_views):
            if not (0 <= view.p_out <= 1 and 0 <= view.p_in <= 1):
                raise InvalidParameter(f"graph view {i}: probabilities must lie in [0, 1]")
            covered.update(view.informative)
        for j, view in enumerate(self.attribute_views):
            if view.noise < 0 or view.dim < 1:
                raise InvalidParameter(f"attribute view {j}: need noise >= 0 and dim >= 1")
            covered.update(view.informative)
        if not covered <= set(range(self.k)):
            raise InvalidParameter(f"informative blocks must lie in [0, {self.k})")
        # two blocks that no view singles out can never be told apart
        if self.k - len(covered) > 1:
            raise InvalidParameter(f"blocks {sorted(set(range(self.k)) - covered)} are not distinguishable by any view")

    @classmethod
    def from_dict(cls, payload: Dict) -> "SbmSpec":
        return cls(
            n=int(payload["n"]),
            k=int(payload["k"]),
            graph_views=[SbmViewSpec(float(v["p_in"]), float(v["p_out"]), list(v["informative"]))
                         for v in payload.get("graph_views", [])],
            attribute_views=[SbmAttributeSpec(list(v["informative"]), float(v.get("noise", 0.5)),
                                              int(v.get("dim", 16)), v.get("knn_k"))
                             for v in payload.get("attribute_views", [])],
            seed=int(payload.get("seed", 42)),
            name=payload.get("name", "sbm"),
        )

    @classmethod
    def from_json(cls, path) -> "SbmSpec":
        try:
            payload = json.loads(Path(path).read_text())
        except json.JSONDecodeError as exc:
            raise ParseError(str(path), exc.lineno, exc.msg) from None
        try:
            return cls.from_dict(payload)
        except (KeyError, TypeError, ValueError) as exc:
            raise ParseError(str(path), None, f"bad SBM spec: {exc}") from None


class MvagDataSimulator:
    def __init__(self, config):
        self.config = config

    @staticmethod
    def block_labels(n: int, k: int) -> np.ndarray:
        """Contiguous, balanced block assignment."""
        return (np.arange(n) * k) // n

    @staticmethod
    def _groups(labels: np.ndarray, informative: List[int]) -> np.ndarray:
        """Informative blocks keep their id; every other block collapses into group -1."""
        return np.where(np.isin(labels, informative), labels, -1)

    def generate_graph_view(self, labels: np.ndarray, view: SbmViewSpec,
                            rng: np.random.Generator) -> GraphView:
        n = len(labels)
        groups = self._groups(labels, view.informative)
        rows, cols = np.triu_indices(n, k=1)
        same = groups[rows] == groups[cols]
        probability = np.where(same, view.p_in, view.p_out)
        hit = rng.random(len(rows)) < probability
        rows, cols = rows[hit], cols[hit]
        ones = np.ones(2 * len(rows))
        adj = sp.coo_matrix((ones, (np.concatenate([rows, cols]), np.concatenate([cols, rows]))),
                            shape=(n, n))
        return GraphView(canonical_csr(adj))

    def generate_attribute_view(self, labels: np.ndarray, view: SbmAttributeSpec,
                                rng: np.random.Generator) -> AttributeView:
        groups = self._groups(labels, view.informative)
        distinct = np.unique(groups)
        means = rng.standard_normal((len(distinct), view.dim))
        index = np.searchsorted(distinct, groups)
        values = means[index] + view.noise * rng.standard_normal((len(labels), view.dim))
        return AttributeView(values)

    def generate_dataset(self, spec: SbmSpec) -> MvagDataset:
        """Deterministic multi-view SBM; the same spec and seed give the same dataset."""
        spec.validate()
        rng = np.random.default_rng(spec.seed)
        labels = self.block_labels(spec.n, spec.k)
        graph_views = [self.generate_graph_view(labels, view, rng) for view in spec.graph_views]
        attribute_views = [self.generate_attribute_view(labels, view, rng) for view in spec.attribute_views]
        dataset = MvagDataset(
            name=spec.name,
            k=spec.k,
            graph_views=graph_views,
            attribute_views=attribute_views,
            labels=labels.astype(np.int64),
            knn_overrides=[view.knn_k for view in spec.attribute_views],
        )
        logger.info("Generated SBM %s: n=%d, k=%d, %d graph + %d attribute views (seed %d)",
                    spec.name, spec.n, spec.k, len(graph_views), len(attribute_views), spec.seed)
        return dataset


def complementary_fixture(seed: int = 7) -> SbmSpec:
    """Four blocks, two graph views that each see only half of them, one noisy attribute view."""
    return SbmSpec(
        n=400,
        k=4,
        graph_views=[SbmViewSpec(0.3, 0.02, [0, 1]), SbmViewSpec(0.3, 0.02, [2, 3])],
        attribute_views=[SbmAttributeSpec([0, 1, 2, 3], noise=3.0, dim=16)],
        seed=seed,
        name="complementary-sbm",
    )
