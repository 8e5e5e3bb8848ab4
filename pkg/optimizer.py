"""Derivative-free minimization over the weight simplex, COBYLA style.

The free variables are the first ``r - 1`` weights; the last weight is
``1 - sum``.  The engine keeps ``n + 1`` interpolation points, fits a linear
model through them, and moves inside a trust region of radius ``rho`` that
only ever shrinks, from ``rhobeg`` down to ``rhoend``.  The simplex
constraints are linear, so the linear model of the constraints is exact: a
trust-region step that leaves the feasible set is pulled back by Euclidean
projection, and every requested point is feasible.

The engine is ask/tell: ``step`` receives the objective value at the point
it proposed last and returns the next point to evaluate.  ``minimize`` is the
one-shot driver built on top of it.
"""

import logging
from dataclasses import dataclass
from typing import Callable, Generator, Optional

import numpy as np

from config import Config
from exceptions import BudgetExhausted, InfeasibleStart, InvalidParameter

logger = logging.getLogger(__name__)

_SUCCESS_RATIO = 0.1
_MIN_STEP_FRACTION = 0.5
_FAR_FACTOR = 2.0
_POISED_TOL = 1e-4
_ARC_DOUBLINGS = 60
_ARC_BISECTIONS = 50


@dataclass(frozen=True)
class SimplexConstraints:
    """w_i >= 0 for the first r-1 weights and their sum <= 1."""

    r: int

    def __post_init__(self):
        if self.r < 1:
            raise InvalidParameter(f"need at least one view, got r={self.r}")

    @property
    def n(self) -> int:
        return self.r - 1

    def violation(self, x: np.ndarray) -> float:
        if len(x) == 0:
            return 0.0
        return float(max(0.0, -x.min(), x.sum() - 1.0))

    def is_feasible(self, x: np.ndarray, tol: float = Config.FEASIBILITY_TOL) -> bool:
        return self.violation(x) <= tol

    def project(self, y: np.ndarray) -> np.ndarray:
        """Euclidean projection onto {x >= 0, sum(x) <= 1}."""
        clipped = np.maximum(y, 0.0)
        if clipped.sum() <= 1.0:
            return clipped
        # sort-based projection onto the probability simplex
        u = np.sort(y)[::-1]
        cumulative = np.cumsum(u) - 1.0
        ranks = np.arange(1, len(y) + 1)
        rho = np.nonzero(u - cumulative / ranks > 0)[0][-1]
        shift = cumulative[rho] / (rho + 1.0)
        return np.maximum(y - shift, 0.0)

    def full_weights(self, x: np.ndarray) -> np.ndarray:
        """Append the eliminated last weight."""
        x = np.maximum(np.asarray(x, dtype=float), 0.0)
        total = x.sum()
        if total > 1.0:
            x = x / total
        return np.append(x, max(0.0, 1.0 - x.sum()))


@dataclass(frozen=True)
class MinimizeResult:
    x: np.ndarray
    fun: float
    nfev: int
    converged: bool
    budget_exhausted: bool


class OptimizerState:
    """Single-owner ask/tell trust-region engine."""

    def __init__(self, x0, constraints: SimplexConstraints, rhobeg: float = Config.RHOBEG,
                 rhoend: float = Config.RHOEND, maxfun: Optional[int] = None):
        x0 = np.asarray(x0, dtype=float)
        if len(x0) != constraints.n:
            raise InfeasibleStart(f"start point has {len(x0)} entries, expected {constraints.n}")
        if not constraints.is_feasible(x0):
            raise InfeasibleStart(f"start point {x0.tolist()} violates the simplex constraints")
        if not 0 < rhoend <= rhobeg:
            raise InvalidParameter(f"need 0 < rhoend <= rhobeg, got {rhoend}, {rhobeg}")
        self.constraints = constraints
        self.rhobeg = rhobeg
        self.rhoend = rhoend
        self.maxfun = maxfun if maxfun is not None else Config.MAXFUN_PER_VIEW * constraints.r
        self.rho = rhobeg
        self.nfev = 0
        self.converged = constraints.n == 0
        self.best_x = x0.copy()
        self.best_f = np.inf
        self._engine = self._run(x0)
        self.current = next(self._engine)

    def step(self, f_value: float) -> np.ndarray:
        """Record f at ``current`` and return the next point to evaluate."""
        if self.nfev >= self.maxfun:
            raise BudgetExhausted(self.nfev)
        self.nfev += 1
        if f_value < self.best_f:
            self.best_f = float(f_value)
            self.best_x = self.current.copy()
        proposal = self._engine.send(float(f_value))
        if not self.constraints.is_feasible(proposal):
            proposal = self.constraints.project(proposal)
        self.current = proposal
        if self.nfev >= self.maxfun and not self.converged:
            raise BudgetExhausted(self.nfev)
        return proposal.copy()

    # -- engine ---------------------------------------------------------

    def _room(self, x: np.ndarray, d: np.ndarray) -> float:
        """Largest t >= 0 with x + t d feasible."""
        t = np.inf
        negative = d < 0
        if negative.any():
            t = min(t, float(np.min(x[negative] / -d[negative])))
        total = d.sum()
        if total > 0:
            t = min(t, (1.0 - x.sum()) / total)
        return max(t, 0.0)

    def _initial_vertex(self, x0: np.ndarray, i: int, rho: float) -> np.ndarray:
        e = np.zeros(len(x0))
        e[i] = 1.0
        up, down = self._room(x0, e), self._room(x0, -e)
        if up >= rho:
            return x0 + rho * e
        if down >= rho:
            return x0 - rho * e
        if max(up, down) > 0:
            return x0 + (up * e if up >= down else -down * e)
        return self.constraints.project(x0 + rho * e)

    @staticmethod
    def _gradient(points: np.ndarray, values: np.ndarray, best: int) -> np.ndarray:
        others = np.delete(np.arange(len(points)), best)
        diffs = points[others] - points[best]
        grad, *_ = np.linalg.lstsq(diffs, values[others] - values[best], rcond=None)
        return grad

    def _trust_region_step(self, xb: np.ndarray, grad: np.ndarray, rho: float) -> np.ndarray:
        """Point on the projected steepest-descent arc at distance rho from ``xb``.

        The arc length is nondecreasing in the step parameter, so the radius is
        located by doubling then bisection.  When the whole arc is shorter than
        rho (it ends at a face or vertex) its far end is returned.
        """
        norm = np.linalg.norm(grad)
        if norm == 0:
            return xb.copy()
        direction = grad / norm

        def arc(t: float) -> np.ndarray:
            return self.constraints.project(xb - t * direction)

        def length(t: float) -> float:
            return float(np.linalg.norm(arc(t) - xb))

        if length(rho) >= rho * (1.0 - 1e-12):
            return arc(rho)
        lo, hi = rho, rho
        for _ in range(_ARC_DOUBLINGS):
            hi *= 2.0
            if length(hi) >= rho:
                break
        else:
            return arc(hi)
        for _ in range(_ARC_BISECTIONS):
            mid = 0.5 * (lo + hi)
            if length(mid) < rho:
                lo = mid
            else:
                hi = mid
        return arc(lo)

    @staticmethod
    def _vertex_to_drop(points: np.ndarray, best: int, trial: np.ndarray,
                        improved: bool, rho: float) -> int:
        """Vertex whose replacement by ``trial`` keeps the simplex volume largest."""
        n = points.shape[1]
        system = np.vstack([points.T, np.ones(n + 1)])
        rhs = np.append(trial, 1.0)
        coords, *_ = np.linalg.lstsq(system, rhs, rcond=None)
        new_best = trial if improved else points[best]
        distances = np.linalg.norm(points - new_best, axis=1)
        scores = np.abs(coords) * np.maximum(1.0, distances / rho)
        if not improved:
            scores[best] = -np.inf
        return int(np.argmax(scores))

    def _geometry_point(self, points: np.ndarray, best: int, drop: int, rho: float):
        """Point at distance <= rho from the best vertex, as far as possible from the others' span."""
        xb = points[best]
        keep = [j for j in range(len(points)) if j not in (best, drop)]
        if keep:
            spanned = points[keep] - xb
            _, _, vt = np.linalg.svd(spanned)
            direction = vt[-1]
            basis = vt[:len(keep)]
        else:
            direction = np.ones(points.shape[1]) / np.sqrt(points.shape[1])
            basis = np.zeros((0, points.shape[1]))
        candidates = [self.constraints.project(xb + rho * direction),
                      self.constraints.project(xb - rho * direction)]

        def orthogonal_reach(p):
            d = p - xb
            return np.linalg.norm(d - basis.T @ (basis @ d))

        reach = [orthogonal_reach(p) for p in candidates]
        pick = int(np.argmax(reach))
        if reach[pick] <= _POISED_TOL * rho:
            return None
        return candidates[pick]

    def _poorly_poised(self, points: np.ndarray, best: int) -> bool:
        diffs = np.delete(points, best, axis=0) - points[best]
        scale = np.linalg.norm(diffs, axis=1).max()
        if scale == 0:
            return True
        smallest = np.linalg.svd(diffs / scale, compute_uv=False).min()
        return smallest < _POISED_TOL

    def _run(self, x0: np.ndarray) -> Generator[np.ndarray, float, None]:
        n = len(x0)
        rho = self.rhobeg
        if n == 0:
            while True:
                yield x0.copy()

        points = [x0.copy()]
        values = [(yield x0.copy())]
        for i in range(n):
            vertex = self._initial_vertex(x0, i, rho)
            points.append(vertex)
            values.append((yield vertex.copy()))
        points = np.array(points)
        values = np.array(values)

        while True:
            best = int(np.argmin(values))
            xb, fb = points[best], values[best]
            grad = self._gradient(points, values, best)
            trial = self._trust_region_step(xb, grad, rho)
            step = trial - xb
            predicted = -float(grad @ step)

            succeeded = False
            if predicted > 0 and np.linalg.norm(step) >= _MIN_STEP_FRACTION * rho:
                ft = yield trial.copy()
                ratio = (fb - ft) / predicted
                drop = self._vertex_to_drop(points, best, trial, ft < fb, rho)
                points[drop], values[drop] = trial, ft
                succeeded = ratio >= _SUCCESS_RATIO
            if succeeded:
                continue

            best = int(np.argmin(values))
            distances = np.linalg.norm(points - points[best], axis=1)
            far = int(np.argmax(distances))
            if distances[far] > _FAR_FACTOR * rho or self._poorly_poised(points, best):
                if distances[far] <= _FAR_FACTOR * rho:
                    far = self._least_independent(points, best)
                geometry = self._geometry_point(points, best, far, rho)
                if geometry is not None:
                    fg = yield geometry.copy()
                    points[far], values[far] = geometry, fg
                    continue

            if rho <= self.rhoend:
                break
            rho = 0.5 * rho
            if rho <= 1.5 * self.rhoend:
                rho = self.rhoend
            self.rho = rho
            logger.debug("Trust region shrunk to %.3e", rho)

        self.converged = True
        final = points[int(np.argmin(values))].copy()
        logger.debug("Optimizer converged at %s", np.round(final, 6).tolist())
        while True:
            yield final.copy()

    @staticmethod
    def _least_independent(points: np.ndarray, best: int) -> int:
        """Vertex contributing least to the simplex volume (smallest orthogonal component)."""
        others = [j for j in range(len(points)) if j != best]
        diffs = points[others] - points[best]
        worst, worst_reach = others[0], np.inf
        for pos, j in enumerate(others):
            rest = np.delete(diffs, pos, axis=0)
            d = diffs[pos]
            if len(rest):
                _, s, vt = np.linalg.svd(rest, full_matrices=False)
                basis = vt[s > 1e-14 * max(s.max(), 1e-300)]
                d = d - basis.T @ (basis @ d)
            reach = np.linalg.norm(d)
            if reach < worst_reach:
                worst, worst_reach = j, reach
        return worst


def init(x0, c: SimplexConstraints, rhobeg: float = Config.RHOBEG,
         rhoend: float = Config.RHOEND, maxfun: Optional[int] = None) -> OptimizerState:
    return OptimizerState(x0, c, rhobeg, rhoend, maxfun)


def step(state: OptimizerState, f_value_at_current: float) -> np.ndarray:
    return state.step(f_value_at_current)


def minimize(f: Callable[[np.ndarray], float], x0, c: SimplexConstraints,
             rhobeg: float = Config.RHOBEG, rhoend: float = Config.RHOEND,
             maxfun: Optional[int] = None) -> MinimizeResult:
    """Run the engine until the trust region reaches ``rhoend`` or the budget runs out."""
    state = init(x0, c, rhobeg, rhoend, maxfun)
    x = state.current
    exhausted = False
    while not state.converged:
        try:
            x = state.step(f(x))
        except BudgetExhausted:
            exhausted = True
            logger.warning("Optimizer budget of %d evaluations exhausted", state.maxfun)
            break
    if state.nfev == 0:
        state.best_f = float(f(x))
        state.best_x = x
        state.nfev = 1
    return MinimizeResult(state.best_x.copy(), state.best_f, state.nfev,
                          state.converged, exhausted)
