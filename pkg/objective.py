"""Spectrum-guided objective h(w) = g_k - lambda_2 + gamma * sum(w_i^2)."""

import itertools
import logging
import threading
from dataclasses import dataclass
from typing import List, Sequence, Tuple

import numpy as np

from config import Config
from exceptions import InsufficientSpectrum, InvalidParameter, NoConvergence, TooManyViews
from linalg import SpectrumSlice, aggregate, smallest_eigenvalues

logger = logging.getLogger(__name__)

OBJECTIVE_MODES = ("full", "eigengap", "connectivity")


@dataclass(frozen=True)
class ObjectiveParams:
    k: int
    gamma: float = Config.GAMMA
    eig_tol: float = Config.EIG_TOL
    tau: float = Config.EIGENGAP_TAU
    seed: int = Config.SEED
    mode: str = "full"

    def __post_init__(self):
        if self.k < 2:
            raise InvalidParameter(f"cluster count k must be >= 2, got {self.k}")
        if self.tau <= 0:
            raise InvalidParameter(f"eigengap floor tau must be positive, got {self.tau}")
        if self.mode not in OBJECTIVE_MODES:
            raise InvalidParameter(f"unknown objective mode {self.mode!r}")


@dataclass(frozen=True)
class ObjectiveValue:
    h: float
    g_k: float
    lambda2: float
    reg: float
    eval_index: int


class EvaluationCounter:
    """Thread-safe count of full-objective evaluations."""

    def __init__(self):
        self._lock = threading.Lock()
        self._count = 0

    def increment(self) -> int:
        with self._lock:
            self._count += 1
            return self._count

    @property
    def count(self) -> int:
        with self._lock:
            return self._count


def validate_weights(w: Sequence[float], r: int = None) -> np.ndarray:
    w = np.asarray(w, dtype=float)
    if r is not None and len(w) != r:
        raise InvalidParameter(f"expected {r} weights, got {len(w)}")
    if np.any(w < 0) or abs(w.sum() - 1.0) > 1e-12:
        raise InvalidParameter(f"weights must lie on the probability simplex, got {w.tolist()}")
    return w


def _clamped(spectrum: SpectrumSlice) -> np.ndarray:
    values = np.array(spectrum.eigenvalues, dtype=float)
    values[np.abs(values) <= Config.EIG_CLAMP] = 0.0
    return values


def eigengap(s: SpectrumSlice, k: int, tau: float = Config.EIGENGAP_TAU) -> float:
    """lambda_k / max(lambda_{k+1}, tau), exactly 0 when lambda_k is 0."""
    values = _clamped(s)
    if len(values) < k + 1:
        raise InsufficientSpectrum(f"eigengap for k={k} needs {k + 1} eigenvalues, got {len(values)}")
    lam_k, lam_next = values[k - 1], values[k]
    if lam_k == 0.0:
        return 0.0
    return float(lam_k / max(lam_next, tau))


def connectivity(s: SpectrumSlice) -> float:
    values = _clamped(s)
    if len(values) < 2:
        raise InsufficientSpectrum(f"connectivity needs 2 eigenvalues, got {len(values)}")
    return float(values[1])


def full_objective(w: Sequence[float], laplacians: Sequence, p: ObjectiveParams,
                   counter: EvaluationCounter) -> ObjectiveValue:
    """Aggregate, take the k+1 smallest eigenvalues and score the weights."""
    w = validate_weights(w, len(laplacians))
    matrix = aggregate(laplacians, w)
    t = min(p.k + 1, matrix.shape[0])
    try:
        spectrum = smallest_eigenvalues(matrix, t, p.eig_tol, p.seed)
    except NoConvergence as exc:
        looser = p.eig_tol * Config.EIG_RETRY_LOOSEN
        logger.warning("Eigensolver missed tol %.1e (%s); retrying once at %.1e", p.eig_tol, exc, looser)
        spectrum = smallest_eigenvalues(matrix, t, looser, p.seed)
    g_k = eigengap(spectrum, p.k, p.tau)
    lambda2 = connectivity(spectrum)
    reg = p.gamma * float(np.dot(w, w))
    if p.mode == "full":
        h = g_k - lambda2 + reg
    elif p.mode == "eigengap":
        h = g_k + reg
    else:
        h = -lambda2 + reg
    index = counter.increment()
    logger.debug("h eval #%d: w=%s h=%.6f (g_k=%.6f, lambda2=%.6f)",
                 index, np.round(w, 6).tolist(), h, g_k, lambda2)
    return ObjectiveValue(h, g_k, lambda2, reg, index)


def simplex_grid(r: int, step: float) -> List[np.ndarray]:
    """All weight vectors on the simplex whose entries are multiples of ``step``."""
    if step <= 0:
        raise InvalidParameter(f"grid step must be positive, got {step}")
    units = int(round(1.0 / step))
    if not np.isclose(units * step, 1.0):
        raise InvalidParameter(f"grid step must divide 1 evenly, got {step}")
    points = []
    # stars and bars: r-1 cut positions among units + r - 1 slots
    for cuts in itertools.combinations(range(units + r - 1), r - 1):
        bounds = (-1,) + cuts + (units + r - 1,)
        counts = [bounds[i + 1] - bounds[i] - 1 for i in range(r)]
        points.append(np.array(counts, dtype=float) / units)
    return points


def brute_force_objective_grid(laplacians: Sequence, p: ObjectiveParams,
                               step: float) -> List[Tuple[np.ndarray, float]]:
    """Evaluate h on every simplex grid point; used as a global-minimum oracle."""
    r = len(laplacians)
    if r > Config.GRID_MAX_VIEWS:
        raise TooManyViews(f"grid search supports at most {Config.GRID_MAX_VIEWS} views, got {r}")
    counter = EvaluationCounter()
    return [(w, full_objective(w, laplacians, p, counter).h) for w in simplex_grid(r, step)]
