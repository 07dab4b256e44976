"""Derivative-free bounded maximization in 1-4 dimensions.

The objectives in this package are cheap closed forms, so the strategy is
brute but reliable: a dense feasibility-aware scan to locate the basin,
followed by high-precision local refinement (bounded Brent in 1-D,
Nelder-Mead with fixed multistart in n-D).  Infeasible points are handled
with a large negative sentinel rather than projection, since the admissible
sets here are open.

Everything is deterministic: the multistart points come from a
fixed-seed Latin hypercube, and there is no other internal randomness.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy.optimize import minimize, minimize_scalar

INFEASIBLE_SENTINEL = -1e18

DEFAULT_TOL_X = 1e-10
DEFAULT_TOL_F = 1e-9
DEFAULT_MAX_EVALS = 100_000
DEFAULT_MULTISTARTS = 8

# |central difference| at the argmax below this multiple of the objective
# scale counts as converged.
FOC_THRESHOLD = 1e-4


class InfeasibleError(RuntimeError):
    """No feasible point found in the search region."""


@dataclass
class OptProblem:
    """A bounded maximization problem of dimension d <= 4.

    ``objective`` maps a point (scalar for d=1, ndarray otherwise) to a
    float.  ``feasible`` is a strict predicate; points failing it are never
    evaluated.  ``objective_batch``, when given, evaluates the objective on
    an array of points in one call and is used to speed up the coarse scan.
    """

    objective: Callable
    box: Sequence[tuple[float, float]]
    feasible: Callable | None = None
    tol_x: float = DEFAULT_TOL_X
    tol_f: float = DEFAULT_TOL_F
    max_evals: int = DEFAULT_MAX_EVALS
    objective_batch: Callable | None = None

    def __post_init__(self):
        self.box = [(float(lo), float(hi)) for lo, hi in self.box]
        for lo, hi in self.box:
            if not lo < hi:
                raise ValueError(f"invalid box bounds ({lo}, {hi})")
        if self.tol_x <= 0 or self.tol_f <= 0:
            raise ValueError("tolerances must be positive")

    @property
    def dim(self) -> int:
        return len(self.box)


@dataclass
class OptReport:
    argmax: np.ndarray
    value: float
    foc_residual: float | None
    evals: int
    converged: bool
    boundary: bool = False
    starts: int = 1


def foc_residual(
    f: Callable,
    x: np.ndarray | float,
    h: float,
    feasible: Callable | None = None,
) -> float | None:
    """Max over coordinates of the central-difference slope |f(x+h)-f(x-h)|/2h.

    Returns None when a probe point leaves the feasible set (boundary case);
    callers should then flag the report instead of trusting a residual.
    """
    x = np.atleast_1d(np.asarray(x, dtype=float))
    worst = 0.0
    for j in range(x.size):
        xp, xm = x.copy(), x.copy()
        xp[j] += h
        xm[j] -= h
        if feasible is not None and not (feasible(_squeeze(xp)) and feasible(_squeeze(xm))):
            return None
        slope = (f(_squeeze(xp)) - f(_squeeze(xm))) / (2.0 * h)
        worst = max(worst, abs(slope))
    return worst


def _squeeze(x: np.ndarray):
    return float(x[0]) if x.size == 1 else x


def _penalized(problem: OptProblem) -> Callable:
    lo = np.array([b[0] for b in problem.box])
    hi = np.array([b[1] for b in problem.box])

    def f(x: np.ndarray) -> float:
        if np.any(x < lo) or np.any(x > hi):
            return INFEASIBLE_SENTINEL
        pt = _squeeze(np.asarray(x, dtype=float))
        if problem.feasible is not None and not problem.feasible(pt):
            return INFEASIBLE_SENTINEL
        return float(problem.objective(pt))

    return f


def maximize_1d(problem: OptProblem, scan_points: int = 1024) -> OptReport:
    """Scan-then-refine maximization on an interval.

    A dense scan (>= 1024 points) picks the best bracket, guarding against
    multimodality, then bounded Brent refinement polishes the argmax to
    tol_x.
    """
    if problem.dim != 1:
        raise ValueError("maximize_1d requires a 1-D problem")
    lo, hi = problem.box[0]
    scan_points = max(scan_points, 1024)
    grid = np.linspace(lo, hi, scan_points)

    evals = 0
    if problem.objective_batch is not None:
        if problem.feasible is not None:
            mask = np.array([problem.feasible(g) for g in grid])
        else:
            mask = np.ones(grid.size, dtype=bool)
        vals = np.full(grid.size, INFEASIBLE_SENTINEL)
        if mask.any():
            vals[mask] = problem.objective_batch(grid[mask])
        evals += int(mask.sum())
    else:
        f = _penalized(problem)
        vals = np.array([f(np.array([g])) for g in grid])
        evals += grid.size

    if vals.max() <= INFEASIBLE_SENTINEL:
        raise InfeasibleError("no feasible point in the 1-D search box")

    i = int(vals.argmax())
    a = grid[max(i - 1, 0)]
    b = grid[min(i + 1, grid.size - 1)]

    fpen = _penalized(problem)
    res = minimize_scalar(
        lambda t: -fpen(np.array([t])),
        bounds=(a, b),
        method="bounded",
        options={"xatol": problem.tol_x, "maxiter": problem.max_evals},
    )
    evals += res.nfev
    x = float(res.x)
    value = -float(res.fun)
    if value < vals[i]:  # refinement never beats the scan on a bad bracket
        x, value = float(grid[i]), float(vals[i])

    # Brent bottoms out at ~sqrt(eps)*|x|; a few Newton steps on the
    # central-difference slope recover the remaining argmax digits
    x, value, used = _slope_polish(fpen, x, value, lo, hi)
    evals += used

    boundary = min(x - lo, hi - x) <= max(problem.tol_x, 1e-9 * (hi - lo))
    resid = foc_residual(
        lambda t: fpen(np.array([t])), np.array([x]), 1e-5, problem.feasible
    )
    converged = boundary or (
        resid is not None and resid <= FOC_THRESHOLD * max(1.0, abs(value))
    )
    return OptReport(
        argmax=np.array([x]),
        value=value,
        foc_residual=resid,
        evals=evals,
        converged=converged,
        boundary=boundary,
    )


def _slope_polish(
    fpen: Callable, x: float, value: float, lo: float, hi: float
) -> tuple[float, float, int]:
    """Newton iterations on the finite-difference slope around a smooth max.

    Purely evaluation-based; bails out on boundaries, non-concavity or any
    step that fails to keep the objective at least as large.
    """
    evals = 0
    for _ in range(3):
        h = 1e-4 * max(1.0, abs(x))
        if x - h <= lo or x + h >= hi:
            break
        fp, fm, f0 = (
            fpen(np.array([x + h])),
            fpen(np.array([x - h])),
            fpen(np.array([x])),
        )
        evals += 3
        if min(fp, fm, f0) <= INFEASIBLE_SENTINEL:
            break
        curv = fp - 2.0 * f0 + fm
        if not np.isfinite(curv) or curv >= 0.0:
            break
        step = -(fp - fm) * h / (2.0 * curv)
        if abs(step) > 8.0 * h:
            break
        cand = min(max(x + step, lo), hi)
        fc = fpen(np.array([cand]))
        evals += 1
        # accept float-noise-level dips; the argmax gains digits regardless
        if fc <= INFEASIBLE_SENTINEL or fc < f0 - 1e-11 * max(1.0, abs(f0)):
            break
        x, value = cand, float(fc)
        if abs(step) < 1e-13 * max(1.0, abs(x)):
            break
    return x, value, evals


def latin_hypercube(box: Sequence[tuple[float, float]], count: int, seed: int = 0) -> np.ndarray:
    """Deterministic Latin hypercube sample over the box."""
    rng = np.random.default_rng(seed)
    d = len(box)
    pts = np.empty((count, d))
    for j, (lo, hi) in enumerate(box):
        cells = (np.arange(count) + rng.random(count)) / count
        rng.shuffle(cells)
        pts[:, j] = lo + cells * (hi - lo)
    return pts


def maximize_nd(problem: OptProblem, starts: Sequence[np.ndarray] | None = None) -> OptReport:
    """Multistart Nelder-Mead maximization with infeasibility penalty.

    ``starts`` defaults to a fixed Latin hypercube over the box.  The best
    local optimum is polished with a second Nelder-Mead pass and reported
    with its first-order-condition residual.
    """
    f = _penalized(problem)
    if starts is None:
        starts = latin_hypercube(problem.box, DEFAULT_MULTISTARTS)
    starts = [np.atleast_1d(np.asarray(s, dtype=float)) for s in starts]
    feasible_starts = [s for s in starts if f(s) > INFEASIBLE_SENTINEL]
    if not feasible_starts:
        raise InfeasibleError("all multistart points are infeasible")

    evals = 0
    best_x, best_v = None, -np.inf
    opts = {
        "xatol": problem.tol_x,
        "fatol": problem.tol_f,
        "maxfev": problem.max_evals,
        "adaptive": problem.dim >= 3,
    }
    for s in feasible_starts:
        res = minimize(lambda x: -f(x), s, method="Nelder-Mead", options=opts)
        evals += res.nfev
        if -res.fun > best_v:
            best_v, best_x = -float(res.fun), np.asarray(res.x, dtype=float)

    # polish once from the incumbent; NM restarts recover from collapsed simplices
    res = minimize(lambda x: -f(x), best_x, method="Nelder-Mead", options=opts)
    evals += res.nfev
    if -res.fun > best_v:
        best_v, best_x = -float(res.fun), np.asarray(res.x, dtype=float)

    lo = np.array([b[0] for b in problem.box])
    hi = np.array([b[1] for b in problem.box])
    boundary = bool(np.any(np.minimum(best_x - lo, hi - best_x) <= problem.tol_x))
    resid = foc_residual(lambda x: f(np.atleast_1d(x)), best_x, 1e-5, problem.feasible)
    converged = boundary or (
        resid is not None and resid <= FOC_THRESHOLD * max(1.0, abs(best_v))
    )
    return OptReport(
        argmax=best_x,
        value=best_v,
        foc_residual=resid,
        evals=evals,
        converged=converged,
        boundary=boundary,
        starts=len(feasible_starts),
    )
