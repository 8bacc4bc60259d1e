"""Iterative drivers: plain fixed point, gradient baselines, and VE cycling.

The iteration unit everywhere is one evaluation of the baseline map (the
fixed-point step, or one gradient step for the descent methods).  A trace
holds exactly one record per baseline evaluation, so an accelerated run and
a plain run compared at record k have spent identical baseline work; the
extrapolation algebra between cycles is not counted (it shows up only in
wall-clock time).

Cycling: each cycle runs the baseline map m+kappa+1 times, extrapolates the
last kappa+2 iterates once, and restarts from the extrapolated point.  The
extrapolated point is accepted only when finite; a bad cycle is discarded
and the run continues from the last plain iterate.  When an objective is
available, the returned solution is never worse than the best plain iterate
encountered.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field
from enum import Enum
from math import sqrt
from typing import Callable

import numpy as np

from . import extrapolation as ve
from .imaging import psnr as _psnr

# cost/PSNR are logged at this cadence: every iteration up to 128*128
# unknowns, every 5th above (each objective evaluation costs one denoiser
# activation on restoration problems)
DENSE_LOG_LIMIT = 128 * 128


class NonFiniteIterate(ArithmeticError):
    """An iterate (or its cost) became NaN/Inf; carries the trace so far."""

    def __init__(self, message: str, trace: "IterationTrace | None" = None):
        super().__init__(message)
        self.trace = trace


class Termination(Enum):
    CONTINUE = "continue"
    CONVERGED = "converged"
    BUDGET = "budget"


@dataclass
class TraceRecord:
    """State after one baseline-map evaluation.

    ``iter`` counts baseline evaluations from 1.  ``cost``/``psnr`` are None
    off the logging cadence; ``gamma_abs_sum`` is set only on the record
    closing a cycle that produced an accepted extrapolation.
    """

    iter: int
    cost: float | None
    psnr: float | None
    step_norm: float
    gamma_abs_sum: float | None
    elapsed_s: float


@dataclass
class IterationTrace:
    records: list[TraceRecord] = field(default_factory=list)
    cycle_weights: list[ve.ExtrapolationWeights] = field(default_factory=list)

    def __len__(self) -> int:
        return len(self.records)

    @property
    def inner_steps(self) -> int:
        return self.records[-1].iter if self.records else 0

    def costs(self) -> np.ndarray:
        return np.array([np.nan if r.cost is None else r.cost for r in self.records])

    def step_norms(self) -> np.ndarray:
        return np.array([r.step_norm for r in self.records])

    def first_iter_at_cost(self, threshold: float) -> int | None:
        """Earliest baseline-evaluation count whose logged cost is <= threshold."""
        for r in self.records:
            if r.cost is not None and r.cost <= threshold:
                return r.iter
        return None

    def max_stability_sum(self) -> float:
        sums = [w.stability_sum for w in self.cycle_weights]
        return max(sums) if sums else 0.0


def check_termination(trace: IterationTrace, tol: float, budget: int) -> Termination:
    """Stop on a relative step norm <= tol, or on exhausting the budget."""
    if not trace.records:
        raise ValueError("termination check on an empty trace")
    last = trace.records[-1]
    if last.step_norm <= tol:
        return Termination.CONVERGED
    if last.iter >= budget:
        return Termination.BUDGET
    return Termination.CONTINUE


# ---------------------------------------------------------------------------
# Problems and configuration
# ---------------------------------------------------------------------------


@dataclass
class FixedPointProblem:
    """A fixed-point map x -> F(x) on flat float64 vectors of length N.

    ``objective`` and ``gradient`` are optional hooks for cost logging and
    for the gradient-based baselines; ``reference`` enables PSNR logging.
    """

    dimension: int
    step: Callable[[np.ndarray], np.ndarray]
    objective: Callable[[np.ndarray], float] | None = None
    gradient: Callable[[np.ndarray], np.ndarray] | None = None
    reference: np.ndarray | None = None


@dataclass
class LinearFixedPointProblem:
    """x_{k+1} = A x_k + b, the analytic test bed for extrapolation.

    ``eigenvalues`` and ``fixed_point`` are optional metadata for rate and
    exactness oracles.
    """

    A: np.ndarray
    b: np.ndarray
    eigenvalues: np.ndarray | None = None
    fixed_point: np.ndarray | None = None

    def __post_init__(self):
        if self.fixed_point is not None:
            star = np.asarray(self.fixed_point, dtype=np.float64)
            residual = np.linalg.norm(star - self.step(star))
            if residual > 1e-10 * max(np.linalg.norm(star), 1.0):
                raise ValueError("declared fixed_point does not satisfy x = A x + b")

    def step(self, x: np.ndarray) -> np.ndarray:
        return self.A @ x + self.b

    def solve(self) -> np.ndarray:
        """Direct fixed point (I - A)^{-1} b."""
        n = self.A.shape[0]
        return np.linalg.solve(np.eye(n) - self.A, self.b)

    def problem(self) -> FixedPointProblem:
        return FixedPointProblem(dimension=self.b.shape[0], step=self.step)


@dataclass
class SolveConfig:
    """Solver selection and budgets.

    method: "fp", "fp-ve", "sd", "sd-ve", or "nesterov"; VE variants take
    the weight rule from ``ve_method`` ("mpe", "rre", "svdmpe").  ``tol`` is
    a relative step-norm threshold (0 means run to budget);
    ``stabilization_iters`` appends plain baseline steps after cycling ends.
    """

    method: str = "fp"
    ve_method: str = ve.MPE
    m: int = 0
    kappa: int = 5
    max_inner_steps: int = 200
    tol: float = 0.0
    stabilization_iters: int = 0
    step_size: float | None = None
    rank_tolerance: float = 1e-12

    def __post_init__(self):
        if self.method not in ("fp", "fp-ve", "sd", "sd-ve", "nesterov"):
            raise ValueError(f"unknown method {self.method!r}")
        if self.ve_method not in ve.METHODS:
            raise ValueError(f"unknown VE method {self.ve_method!r}")
        if self.kappa < 1:
            raise ValueError("kappa must be >= 1")
        if self.m < 0:
            raise ValueError("m must be >= 0")
        if self.max_inner_steps < 1:
            raise ValueError("max_inner_steps must be >= 1")
        if self.tol < 0:
            raise ValueError("tol must be >= 0")
        if self.stabilization_iters < 0:
            raise ValueError("stabilization_iters must be >= 0")
        if self.method in ("fp-ve", "sd-ve") and self.max_inner_steps < self.m + self.kappa + 2:
            raise ValueError("budget must admit at least one full cycle (m + kappa + 2)")


# ---------------------------------------------------------------------------
# Shared recording machinery
# ---------------------------------------------------------------------------


class _Recorder:
    def __init__(self, problem: FixedPointProblem, config: SolveConfig, track_best=False):
        self.problem = problem
        self.tol = config.tol
        self.budget = config.max_inner_steps
        self.trace = IterationTrace()
        self.k = 0
        self.log_every = 1 if problem.dimension <= DENSE_LOG_LIMIT else 5
        self.track_best = track_best and problem.objective is not None
        self.best_cost = np.inf
        self.best_x: np.ndarray | None = None
        self.t0 = time.perf_counter()

    def note_initial(self, x0: np.ndarray):
        if self.track_best:
            c = float(self.problem.objective(x0))
            if np.isfinite(c):
                self.best_cost, self.best_x = c, x0.copy()

    def record(self, x_prev: np.ndarray, x_new: np.ndarray) -> Termination:
        self.k += 1
        if x_new.shape != x_prev.shape:
            raise ValueError(f"step changed the dimension: {x_prev.shape} -> {x_new.shape}")
        denom = float(np.linalg.norm(x_prev)) or 1.0
        step_norm = float(np.linalg.norm(x_new - x_prev)) / denom
        cost = psnr = None
        on_cadence = self.k % self.log_every == 0
        if on_cadence and self.problem.objective is not None:
            cost = float(self.problem.objective(x_new))
            if self.track_best and cost < self.best_cost:
                self.best_cost, self.best_x = cost, x_new.copy()
        if on_cadence and self.problem.reference is not None:
            psnr = _psnr(x_new, self.problem.reference)
        self.trace.records.append(
            TraceRecord(
                iter=self.k,
                cost=cost,
                psnr=psnr,
                step_norm=step_norm,
                gamma_abs_sum=None,
                elapsed_s=time.perf_counter() - self.t0,
            )
        )
        if not np.all(np.isfinite(x_new)):
            raise NonFiniteIterate(f"iterate diverged at inner step {self.k}", self.trace)
        if cost is not None and not np.isfinite(cost):
            raise NonFiniteIterate(f"objective diverged at inner step {self.k}", self.trace)
        return check_termination(self.trace, self.tol, self.budget)

    def finalize(self, x: np.ndarray) -> np.ndarray:
        """Return x, or the best plain iterate if that one had lower cost."""
        if not self.track_best or self.best_x is None:
            return x
        final_cost = float(self.problem.objective(x))
        if np.isfinite(final_cost) and final_cost <= self.best_cost:
            return x
        return self.best_x


def _as_vector(x0, dimension: int) -> np.ndarray:
    x = np.asarray(x0, dtype=np.float64).ravel().copy()
    if x.shape[0] != dimension:
        raise ValueError(f"x0 has dimension {x.shape[0]}, problem wants {dimension}")
    if not np.all(np.isfinite(x)):
        raise ValueError("x0 contains non-finite entries")
    return x


def _sd_map(problem: FixedPointProblem, config: SolveConfig):
    if problem.gradient is None:
        raise ValueError("this method needs a gradient")
    if config.step_size is None or config.step_size <= 0:
        raise ValueError("this method needs a positive step_size")
    s = config.step_size
    return lambda x: x - s * problem.gradient(x)


# ---------------------------------------------------------------------------
# Drivers
# ---------------------------------------------------------------------------


def run_fixed_point(problem: FixedPointProblem, x0, config: SolveConfig):
    """Plain iteration x_{k+1} = F(x_k) until tol or budget."""
    x = _as_vector(x0, problem.dimension)
    rec = _Recorder(problem, config)
    while True:
        x_new = problem.step(x)
        decision = rec.record(x, x_new)
        x = x_new
        if decision is not Termination.CONTINUE:
            break
    return x, rec.trace


def run_steepest_descent(problem: FixedPointProblem, x0, config: SolveConfig):
    """x_{k+1} = x_k - step_size * grad E(x_k) with a fixed step size."""
    x = _as_vector(x0, problem.dimension)
    step = _sd_map(problem, config)
    rec = _Recorder(problem, config)
    while True:
        x_new = step(x)
        decision = rec.record(x, x_new)
        x = x_new
        if decision is not Termination.CONTINUE:
            break
    return x, rec.trace


def run_nesterov(problem: FixedPointProblem, x0, config: SolveConfig):
    """Accelerated gradient with the t_{k+1} = (1+sqrt(1+4 t_k^2))/2 momentum.

    Constant step size, no restarts; one gradient evaluation per iteration.
    """
    if problem.gradient is None:
        raise ValueError("nesterov needs a gradient")
    if config.step_size is None or config.step_size <= 0:
        raise ValueError("nesterov needs a positive step_size")
    s = config.step_size
    x = _as_vector(x0, problem.dimension)
    y = x.copy()
    t = 1.0
    rec = _Recorder(problem, config)
    while True:
        x_new = y - s * problem.gradient(y)
        decision = rec.record(x, x_new)
        t_next = (1.0 + sqrt(1.0 + 4.0 * t * t)) / 2.0
        y = x_new + ((t - 1.0) / t_next) * (x_new - x)
        x, t = x_new, t_next
        if decision is not Termination.CONTINUE:
            break
    return x, rec.trace


def run_ve_cycling(problem: FixedPointProblem, x0, config: SolveConfig):
    """Cycling acceleration of the baseline map (fixed point or SD).

    Termination is checked after every baseline evaluation; when a cycle
    completes, its window is extrapolated and the run restarts from the
    extrapolated point.  After the loop, ``stabilization_iters`` plain
    baseline steps are appended.
    """
    base = _sd_map(problem, config) if config.method == "sd-ve" else problem.step
    x = _as_vector(x0, problem.dimension)
    rec = _Recorder(problem, config, track_best=True)
    rec.note_initial(x)
    cycle_len = config.m + config.kappa + 1
    while True:
        xs = [x]
        converged = False
        for _ in range(cycle_len):
            x_new = base(x)
            decision = rec.record(x, x_new)
            x = x_new
            xs.append(x)
            if decision is Termination.CONVERGED:
                converged = True
                break
            if decision is Termination.BUDGET:
                break
        if converged:
            break
        if len(xs) == cycle_len + 1:
            window = ve.VectorSequenceWindow(np.asarray(xs[config.m :]), m=config.m)
            result = ve.extrapolate_once(window, config.ve_method, config.rank_tolerance)
            if result.converged:
                x = result.vector
                break
            if result.extrapolated and np.all(np.isfinite(result.vector)):
                x = result.vector
                rec.trace.records[-1].gamma_abs_sum = result.weights.stability_sum
                rec.trace.cycle_weights.append(result.weights)
            # else: discard the cycle, continue from the last plain iterate
        if rec.k >= config.max_inner_steps:
            break
    for _ in range(config.stabilization_iters):
        x_new = base(x)
        rec.record(x, x_new)
        x = x_new
    return rec.finalize(x), rec.trace


_DRIVERS = {
    "fp": run_fixed_point,
    "fp-ve": run_ve_cycling,
    "sd": run_steepest_descent,
    "sd-ve": run_ve_cycling,
    "nesterov": run_nesterov,
}


def solve(problem: FixedPointProblem, x0, config: SolveConfig):
    """Dispatch on config.method; returns (solution, trace)."""
    return _DRIVERS[config.method](problem, x0, config)
