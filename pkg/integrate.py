"""Weight search drivers that turn view Laplacians into one MVAG Laplacian.

``run_sgla`` interleaves full-objective evaluations with steps of one
persistent optimizer.  ``run_sgla_plus`` spends only r+1 evaluations: it
samples the uniform weights and the midpoints towards every one-hot vector,
fits a ridge-regularized quadratic surrogate through them and minimizes the
surrogate instead of the objective.
"""

import logging
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from typing import List, Optional, Sequence, Tuple

import numpy as np
import scipy.linalg
import scipy.sparse as sp

from config import Config
from exceptions import BudgetExhausted, DimensionMismatch, InvalidParameter, SingularSystem
from linalg import aggregate
from objective import EvaluationCounter, ObjectiveParams, full_objective
from optimizer import SimplexConstraints, init, minimize
from views import laplacian_from_adjacency

logger = logging.getLogger(__name__)

BASELINE_MODES = ("equal", "single", "eigengap", "connectivity", "graph-agg")


@dataclass(frozen=True)
class SglaParams:
    t_max: int = Config.T_MAX
    epsilon: float = Config.EPSILON
    gamma: float = Config.GAMMA
    alpha_r: float = Config.ALPHA_R
    knn_k: int = Config.KNN_K
    seed: int = Config.SEED
    eig_tol: float = Config.EIG_TOL
    rhobeg: float = Config.RHOBEG
    rhoend: float = Config.RHOEND
    safeguard: bool = False
    restart_optimizer: bool = False
    workers: int = 1

    def __post_init__(self):
        if self.t_max < 1:
            raise InvalidParameter(f"T_max must be >= 1, got {self.t_max}")
        if self.epsilon <= 0:
            raise InvalidParameter(f"epsilon must be positive, got {self.epsilon}")
        if self.alpha_r < 0:
            raise InvalidParameter(f"alpha_r must be non-negative, got {self.alpha_r}")

    def objective(self, k: int, mode: str = "full") -> ObjectiveParams:
        return ObjectiveParams(k=k, gamma=self.gamma, eig_tol=self.eig_tol, seed=self.seed, mode=mode)


@dataclass(frozen=True)
class QuadraticSurrogate:
    """h_theta(w) = z^T Theta z with z = [w_1, ..., w_{r-1}, 1] and Theta upper triangular."""

    theta: np.ndarray

    @property
    def r(self) -> int:
        return self.theta.shape[0]


@dataclass(frozen=True)
class TraceRecord:
    iteration: int
    weights: np.ndarray
    h: float
    evaluations: int


@dataclass
class IntegrationResult:
    method: str
    weights: np.ndarray
    laplacian: sp.csr_matrix
    trace: List[TraceRecord] = field(default_factory=list)
    evaluations: int = 0
    converged: bool = False
    wall_time: float = 0.0
    surrogate: Optional[QuadraticSurrogate] = None


def _check_views(laplacians: Sequence) -> int:
    if not laplacians:
        raise DimensionMismatch("need at least one view Laplacian")
    n = laplacians[0].n
    for i, lap in enumerate(laplacians):
        if lap.n != n:
            raise DimensionMismatch(f"view {i} has {lap.n} nodes, expected {n}")
    return len(laplacians)


class _Evaluator:
    """Full-objective calls with a shared counter and a trace."""

    def __init__(self, laplacians: Sequence, objective: ObjectiveParams):
        self.laplacians = laplacians
        self.objective = objective
        self.counter = EvaluationCounter()
        self.trace: List[TraceRecord] = []

    def __call__(self, weights: np.ndarray, iteration: int) -> float:
        value = full_objective(weights, self.laplacians, self.objective, self.counter)
        self.trace.append(TraceRecord(iteration, np.array(weights), value.h, value.eval_index))
        return value.h

    def silent(self, weights: np.ndarray) -> float:
        return full_objective(weights, self.laplacians, self.objective, self.counter).h


def _result(method, weights, laplacians, evaluator, converged, started, surrogate=None):
    weights = np.asarray(weights, dtype=float)
    return IntegrationResult(
        method=method,
        weights=weights,
        laplacian=aggregate(laplacians, weights),
        trace=list(evaluator.trace) if evaluator else [],
        evaluations=evaluator.counter.count if evaluator else 0,
        converged=converged,
        wall_time=time.perf_counter() - started,
        surrogate=surrogate,
    )


def _log_run(result: IntegrationResult):
    logger.info("%s finished: w=%s, %d evaluations, converged=%s, %.2fs",
                result.method, np.round(result.weights, 4).tolist(), result.evaluations,
                result.converged, result.wall_time)


def run_sgla(laplacians: Sequence, k: int, params: SglaParams = None,
             mode: str = "full", method: str = "sgla") -> IntegrationResult:
    """Alternate objective evaluations and optimizer steps until the weights settle."""
    params = params or SglaParams()
    r = _check_views(laplacians)
    started = time.perf_counter()
    evaluate = _Evaluator(laplacians, params.objective(k, mode))

    if r == 1:
        evaluate(np.array([1.0]), 0)
        result = _result(method, [1.0], laplacians, evaluate, True, started)
        _log_run(result)
        return result

    constraints = SimplexConstraints(r)
    w = np.full(r - 1, 1.0 / r)
    converged = False
    if params.restart_optimizer:
        w, converged = _restarted_search(evaluate, constraints, w, params)
    else:
        state = init(w, constraints, params.rhobeg, params.rhoend,
                     max(Config.MAXFUN_PER_VIEW * r, params.t_max + 1))
        for t in range(1, params.t_max + 1):
            h = evaluate(constraints.full_weights(w), t)
            try:
                proposal = state.step(h)
            except BudgetExhausted:
                logger.warning("SGLA optimizer budget exhausted at iteration %d", t)
                break
            if np.linalg.norm(proposal - w) < params.epsilon:
                converged = True
                break
            w = proposal

    result = _result(method, constraints.full_weights(w), laplacians, evaluate, converged, started)
    _log_run(result)
    return result


def _restarted_search(evaluate: _Evaluator, constraints: SimplexConstraints, w: np.ndarray,
                      params: SglaParams) -> Tuple[np.ndarray, bool]:
    """Each outer iteration runs a fresh one-shot optimization from the current weights."""
    for t in range(1, params.t_max + 1):
        outcome = minimize(lambda x: evaluate(constraints.full_weights(x), t), w, constraints,
                           params.rhobeg, params.rhoend,
                           Config.MAXFUN_PER_VIEW * constraints.r)
        if np.linalg.norm(outcome.x - w) < params.epsilon:
            return outcome.x, True
        w = outcome.x
    return w, False


def sample_weight_vectors(r: int) -> List[np.ndarray]:
    """Uniform weights plus, for each view, the midpoint towards its one-hot vector."""
    if r < 1:
        raise InvalidParameter(f"need at least one view, got r={r}")
    uniform = np.full(r, 1.0 / r)
    samples = [uniform]
    for view in range(r):
        one_hot = np.zeros(r)
        one_hot[view] = 1.0
        samples.append((uniform + one_hot) / 2.0)
    return samples


def _upper_pairs(r: int) -> List[Tuple[int, int]]:
    return [(i, j) for i in range(r) for j in range(i, r)]


def _lifted(w: Sequence[float]) -> np.ndarray:
    """z = [w_1, ..., w_{r-1}, 1]; the last weight is implied by the others."""
    w = np.asarray(w, dtype=float)
    return np.append(w[:-1], 1.0)


def _design_row(w: Sequence[float]) -> np.ndarray:
    z = _lifted(w)
    return np.array([z[i] * z[j] for i, j in _upper_pairs(len(z))])


def fit_surrogate(samples: Sequence[Sequence[float]], values: Sequence[float],
                  alpha_r: float) -> QuadraticSurrogate:
    """Ridge fit of the quadratic surrogate, solved by Cholesky on the normal equations."""
    if not samples or len(samples) != len(values):
        raise InvalidParameter(f"need matching samples and values, got {len(samples)} and {len(values)}")
    r = len(samples[0])
    design = np.array([_design_row(w) for w in samples])
    gram = design.T @ design + alpha_r * np.eye(design.shape[1])
    try:
        factor = scipy.linalg.cho_factor(gram)
    except np.linalg.LinAlgError as exc:
        raise SingularSystem(f"surrogate normal equations are singular (alpha_r={alpha_r})") from exc
    coefficients = scipy.linalg.cho_solve(factor, design.T @ np.asarray(values, dtype=float))
    if not np.all(np.isfinite(coefficients)):
        raise SingularSystem("surrogate fit produced non-finite coefficients")
    theta = np.zeros((r, r))
    for (i, j), value in zip(_upper_pairs(r), coefficients):
        theta[i, j] = value
    return QuadraticSurrogate(theta)


def evaluate_surrogate(s: QuadraticSurrogate, w: Sequence[float]) -> float:
    if len(w) != s.r:
        raise DimensionMismatch(f"surrogate over {s.r} views got {len(w)} weights")
    z = _lifted(w)
    return float(z @ s.theta @ z)


def _dedupe(samples: List[np.ndarray]) -> List[np.ndarray]:
    seen, unique = set(), []
    for w in samples:
        key = tuple(w.tolist())
        if key not in seen:
            seen.add(key)
            unique.append(w)
    return unique


def run_sgla_plus(laplacians: Sequence, k: int, params: SglaParams = None) -> IntegrationResult:
    """Fit a quadratic surrogate from r+1 samples and minimize it instead of h."""
    params = params or SglaParams()
    r = _check_views(laplacians)
    started = time.perf_counter()
    evaluate = _Evaluator(laplacians, params.objective(k))

    samples = _dedupe(sample_weight_vectors(r))
    if params.workers > 1 and len(samples) > 1:
        with ThreadPoolExecutor(max_workers=params.workers) as pool:
            values = list(pool.map(evaluate.silent, samples))
        for ell, (w, h) in enumerate(zip(samples, values)):
            evaluate.trace.append(TraceRecord(0, w, h, ell + 1))
    else:
        values = [evaluate(w, 0) for w in samples]

    if r == 1:
        result = _result("sgla+", [1.0], laplacians, evaluate, True, started)
        _log_run(result)
        return result

    surrogate = fit_surrogate(samples, values, params.alpha_r)
    constraints = SimplexConstraints(r)
    w = np.full(r - 1, 1.0 / r)
    state = init(w, constraints, params.rhobeg, params.rhoend,
                 max(Config.MAXFUN_PER_VIEW * r, params.t_max + 1))
    converged = False
    for _ in range(params.t_max):
        h_theta = evaluate_surrogate(surrogate, constraints.full_weights(w))
        try:
            proposal = state.step(h_theta)
        except BudgetExhausted:
            break
        if np.linalg.norm(proposal - w) < params.epsilon:
            converged = True
            break
        w = proposal
    weights = constraints.full_weights(w)

    if params.safeguard:
        h_dagger = evaluate(weights, 1)
        candidates = list(zip(samples, values)) + [(weights, h_dagger)]
        weights = min(candidates, key=lambda pair: pair[1])[0]

    result = _result("sgla+", weights, laplacians, evaluate, converged, started, surrogate)
    _log_run(result)
    return result


def baseline_weights(mode: str, laplacians: Sequence, k: int, params: SglaParams = None,
                     view: Optional[int] = None) -> IntegrationResult:
    """Ablation integrations; ``view`` is the 1-based view index for ``single``."""
    params = params or SglaParams()
    r = _check_views(laplacians)
    started = time.perf_counter()
    if mode not in BASELINE_MODES:
        raise InvalidParameter(f"unknown baseline mode {mode!r}")

    if mode in ("eigengap", "connectivity"):
        return run_sgla(laplacians, k, params, mode=mode, method=f"{mode}-only")

    if mode == "graph-agg":
        adjacencies = [lap.adjacency for lap in laplacians]
        if any(adj is None for adj in adjacencies):
            raise InvalidParameter("graph-agg needs the adjacency of every view")
        summed = sp.csr_matrix(adjacencies[0], dtype=float)
        for adj in adjacencies[1:]:
            summed = summed + adj
        result = IntegrationResult("graph-agg", np.full(r, 1.0 / r), laplacian_from_adjacency(summed),
                                   converged=True, wall_time=time.perf_counter() - started)
        _log_run(result)
        return result

    if mode == "equal":
        weights = np.full(r, 1.0 / r)
        method = "equal"
    else:
        if view is None or not 1 <= view <= r:
            raise InvalidParameter(f"single-view baseline needs a view index in [1, {r}], got {view}")
        weights = np.zeros(r)
        weights[view - 1] = 1.0
        method = f"single={view}"
    evaluate = _Evaluator(laplacians, params.objective(k))
    evaluate(weights, 0)
    result = _result(method, weights, laplacians, evaluate, True, started)
    _log_run(result)
    return result


def with_overrides(params: SglaParams, **overrides) -> SglaParams:
    """Copy of ``params`` with every non-None override applied."""
    return replace(params, **{key: value for key, value in overrides.items() if value is not None})
