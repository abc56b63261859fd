"""Deterministic augmented-Lagrangian solver for inequality-constrained problems.

Problems are posed as ``minimize f(z) subject to g_j(z) >= 0``. The outer
loop updates multipliers and the penalty; the inner loop minimizes the
augmented Lagrangian with limited-memory quasi-Newton directions and an
Armijo backtracking line search. A run that makes no progress for three
outer iterations at ``penalty_max`` stops early, unconverged. Gradients
default to central finite differences; analytic gradients can be supplied
and validated with :func:`check_gradient`.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

logger = logging.getLogger(__name__)


class NumericalFailure(RuntimeError):
    """A non-finite objective or constraint value was produced."""

    def __init__(self, message: str, iterate: np.ndarray):
        super().__init__(message)
        self.iterate = np.array(iterate, copy=True)


@dataclass
class SolverConfig:
    max_outer_iters: int = 30
    max_inner_iters: int = 4000
    tol_grad: float = 1e-6
    tol_constraint: float = 1e-4
    penalty_init: float = 10.0
    penalty_growth: float = 10.0
    fd_step: float = 1e-5
    seed: int = 0
    memory: int = 12
    penalty_max: float = 1e9

    def __post_init__(self):
        if self.tol_grad <= 0 or self.tol_constraint <= 0 or self.fd_step <= 0:
            raise ValueError("tolerances and fd_step must be positive")
        if self.penalty_growth <= 1:
            raise ValueError("penalty_growth must exceed 1")
        if self.max_outer_iters < 1 or self.max_inner_iters < 1:
            raise ValueError("iteration budgets must be positive")


@dataclass
class NlpProblem:
    """``minimize objective(z)`` subject to ``g(z) >= 0`` for every inequality.

    ``inequality_constraints`` is either a sequence of scalar functions or a
    single function returning the vector of all constraint values. Supplying
    ``gradient`` (objective) and ``jacobian`` (dense, constraints x dim)
    replaces finite differences.
    """

    objective: Callable[[np.ndarray], float]
    initial_point: np.ndarray
    inequality_constraints: Sequence[Callable] | Callable | None = None
    gradient: Callable[[np.ndarray], np.ndarray] | None = None
    jacobian: Callable[[np.ndarray], np.ndarray] | None = None

    def __post_init__(self):
        self.initial_point = np.asarray(self.initial_point, dtype=float).ravel()
        if self.dim < 1:
            raise ValueError("problem dimension must be at least 1")
        cons = self.inequality_constraints
        if cons is None:
            self._cons = lambda z: np.zeros(0)
        elif callable(cons):
            self._cons = lambda z: np.atleast_1d(np.asarray(cons(z), dtype=float))
        else:
            funcs = list(cons)
            self._cons = lambda z: np.array([float(c(z)) for c in funcs])

    @property
    def dim(self) -> int:
        return self.initial_point.size

    def constraints(self, z) -> np.ndarray:
        return self._cons(z)


@dataclass
class SolveReport:
    solution: np.ndarray
    objective_value: float
    max_violation: float
    outer_iters: int
    inner_iters_total: int
    converged: bool
    grad_norm: float = np.inf
    multipliers: np.ndarray = field(default_factory=lambda: np.zeros(0))
    violation_history: list = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "solution": self.solution.tolist(),
            "objective_value": self.objective_value,
            "max_violation": self.max_violation,
            "outer_iters": self.outer_iters,
            "inner_iters_total": self.inner_iters_total,
            "converged": self.converged,
            "grad_norm": self.grad_norm,
            "multipliers": self.multipliers.tolist(),
            "violation_history": list(self.violation_history),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "SolveReport":
        return cls(
            solution=np.array(d["solution"], dtype=float),
            objective_value=d["objective_value"],
            max_violation=d["max_violation"],
            outer_iters=d["outer_iters"],
            inner_iters_total=d["inner_iters_total"],
            converged=d["converged"],
            grad_norm=d["grad_norm"],
            multipliers=np.array(d.get("multipliers", []), dtype=float),
            violation_history=list(d.get("violation_history", [])),
        )


def gradient_fd(f: Callable, z, h: float = 1e-5) -> np.ndarray:
    """Central-difference gradient of a scalar function."""
    z = np.asarray(z, dtype=float)
    grad = np.empty(z.size)
    step = np.zeros(z.size)
    for i in range(z.size):
        step[i] = h
        fp, fm = f(z + step), f(z - step)
        step[i] = 0.0
        if not (np.isfinite(fp) and np.isfinite(fm)):
            raise NumericalFailure(f"non-finite value while differencing component {i}", z)
        grad[i] = (fp - fm) / (2.0 * h)
    return grad


def jacobian_fd(g: Callable, z, h: float = 1e-5) -> np.ndarray:
    """Central-difference Jacobian (outputs x inputs) of a vector function."""
    z = np.asarray(z, dtype=float)
    cols = []
    step = np.zeros(z.size)
    for i in range(z.size):
        step[i] = h
        gp, gm = np.asarray(g(z + step)), np.asarray(g(z - step))
        step[i] = 0.0
        cols.append((gp - gm) / (2.0 * h))
    jac = np.stack(cols, axis=-1)
    if not np.all(np.isfinite(jac)):
        raise NumericalFailure("non-finite constraint Jacobian", z)
    return jac


def check_gradient(f: Callable, grad_f: Callable, z, h: float = 1e-5) -> float:
    """Largest per-component relative error of ``grad_f`` against central differences.

    The denominator of each component is ``max(1, |fd_i|)``.
    """
    fd = gradient_fd(f, z, h)
    an = np.asarray(grad_f(np.asarray(z, dtype=float)), dtype=float)
    return float(np.max(np.abs(an - fd) / np.maximum(1.0, np.abs(fd))))


def _two_loop(g, s_hist, y_hist):
    q = g.copy()
    alphas = []
    for s, y in zip(reversed(s_hist), reversed(y_hist)):
        a = (s @ q) / (y @ s)
        alphas.append(a)
        q -= a * y
    if s_hist:
        s, y = s_hist[-1], y_hist[-1]
        q *= (s @ y) / (y @ y)
    for (s, y), a in zip(zip(s_hist, y_hist), reversed(alphas)):
        b = (y @ q) / (y @ s)
        q += (a - b) * s
    return -q


def _minimize_inner(fg, z, tol, max_iter, memory, callback=None):
    """Quasi-Newton descent with Armijo backtracking. Returns (z, f, grad, iterations)."""
    f, g = fg(z)
    s_hist: list = []
    y_hist: list = []
    it = 0
    while it < max_iter:
        if np.max(np.abs(g)) <= tol:
            break
        d = _two_loop(g, s_hist, y_hist)
        slope = g @ d
        if not slope < 0:
            s_hist.clear()
            y_hist.clear()
            d = -g
            slope = -(g @ g)
        t = 1.0
        if not s_hist:
            t = min(1.0, 1.0 / max(np.linalg.norm(g), 1e-12))
        accepted = False
        while t > 1e-16:
            z_new = z + t * d
            f_new, g_new = fg(z_new)
            if np.isfinite(f_new) and f_new <= f + 1e-4 * t * slope:
                accepted = True
                break
            t *= 0.5
        it += 1
        if not accepted:
            if s_hist:
                s_hist.clear()
                y_hist.clear()
                continue
            break
        s, y = z_new - z, g_new - g
        if s @ y > 1e-12 * np.linalg.norm(s) * np.linalg.norm(y):
            s_hist.append(s)
            y_hist.append(y)
            if len(s_hist) > memory:
                s_hist.pop(0)
                y_hist.pop(0)
        if callback is not None:
            callback(z_new, f_new, f)
        progress = f - f_new
        z, f, g = z_new, f_new, g_new
        if progress <= 1e-15 * max(1.0, abs(f)) and np.max(np.abs(s)) <= 1e-15:
            break
    return z, f, g, it


def solve(problem: NlpProblem, cfg: SolverConfig | None = None, callback=None) -> SolveReport:
    """Minimize ``problem.objective`` subject to its inequality constraints.

    ``callback(z, al_new, al_old)`` is invoked after every accepted inner
    step. Running out of iterations is not an error: the last iterate is
    returned with ``converged=False``.
    """
    cfg = cfg or SolverConfig()
    fobj = problem.objective
    fcons = problem.constraints
    h = cfg.fd_step

    def grad_f(z):
        if problem.gradient is not None:
            return np.asarray(problem.gradient(z), dtype=float)
        return gradient_fd(fobj, z, h)

    def jac_g(z):
        if problem.jacobian is not None:
            return np.asarray(problem.jacobian(z), dtype=float)
        return jacobian_fd(fcons, z, h)

    z = problem.initial_point.copy()
    f0, g0 = fobj(z), fcons(z)
    if not (np.isfinite(f0) and np.all(np.isfinite(g0))):
        raise NumericalFailure("non-finite objective or constraint at the initial point", z)
    m = g0.size
    lam = np.zeros(m)
    rho = cfg.penalty_init

    def make_fg(lam, rho):
        def fg(z):
            f = fobj(z)
            g = fcons(z)
            if not (np.isfinite(f) and np.all(np.isfinite(g))):
                return np.inf, None
            shifted = np.maximum(0.0, lam / rho - g)
            val = f + 0.5 * rho * (shifted @ shifted)
            grad = grad_f(z)
            if m:
                active = shifted > 0
                if np.any(active):
                    grad = grad - rho * (shifted[active] @ jac_g(z)[active])
            return val, grad
        return fg

    history = [float(np.max(np.maximum(0.0, -g0), initial=0.0))]
    inner_total = 0
    prev_viol = history[0]
    converged = False
    gnorm = np.inf
    outer = 0
    stalled = 0
    # inexact early inner solves, tightened tenfold per outer iteration
    omega = max(cfg.tol_grad, 1e-2)
    for outer in range(1, cfg.max_outer_iters + 1):
        tol = omega * max(1.0, float(np.max(np.abs(grad_f(z)))))
        omega = max(cfg.tol_grad, 0.1 * omega)
        z, _, grad, its = _minimize_inner(
            make_fg(lam, rho), z, tol, cfg.max_inner_iters, cfg.memory, callback
        )
        inner_total += its
        # stationarity relative to the scale of the objective gradient
        gnorm = float(np.max(np.abs(grad))) / max(1.0, float(np.max(np.abs(grad_f(z)))))
        g = fcons(z)
        if not (np.isfinite(fobj(z)) and np.all(np.isfinite(g))):
            raise NumericalFailure("non-finite value at an accepted iterate", z)
        viol = float(np.max(np.maximum(0.0, -g), initial=0.0))
        history.append(viol)
        logger.debug("outer %d: violation %.3e, |grad| %.3e, rho %.1e, inner %d",
                     outer, viol, gnorm, rho, its)
        lam = np.maximum(0.0, lam - rho * g)
        if viol <= cfg.tol_constraint and gnorm <= cfg.tol_grad:
            converged = True
            break
        # at the penalty ceiling with no progress the problem is treated as locally infeasible
        stalled = stalled + 1 if rho >= cfg.penalty_max and viol >= (1.0 - 1e-6) * prev_viol else 0
        if stalled >= 3:
            logger.debug("stopping: no progress at the maximum penalty")
            break
        if viol > 0.25 * prev_viol and viol > cfg.tol_constraint:
            rho = min(rho * cfg.penalty_growth, cfg.penalty_max)
        prev_viol = viol

    g = fcons(z)
    return SolveReport(
        solution=z,
        objective_value=float(fobj(z)),
        max_violation=float(np.max(np.maximum(0.0, -g), initial=0.0)),
        outer_iters=outer,
        inner_iters_total=inner_total,
        converged=converged,
        grad_norm=gnorm,
        multipliers=lam,
        violation_history=history,
    )
