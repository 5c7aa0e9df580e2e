"""Iterative solvers for the smoothed dual problem: FISTA with the zero-mean
projection as its proximal step, and a Sinkhorn matrix-scaling baseline.

Both solvers share the same relative-change stopping rule so iteration counts
are comparable: FISTA monitors the dual energy E(psi), Sinkhorn monitors its
transport-cost estimate <P, C>. Each solver records a per-iteration trace and
reports a terminal status instead of ever returning non-finite values.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

from .costs import CostMatrix
from .measures import DiscreteMeasure
from .smoothed_dual import Potential, TransportPlan, project_H, recover_plan

CONVERGED = "converged"
MAX_ITERS = "max_iters"
NUMERICAL_FAILURE = "numerical_failure"

TRACE_COLUMNS = ("iter", "E", "E_lambda", "plan_cost", "marginal_dev", "wall_ms")


@dataclass(frozen=True)
class FistaConfig:
    """Step multiplier and termination settings for :func:`fista_solve`.

    The effective step is ``eta * lam``; ``eta = 1`` matches the safe
    ``1/L`` step for the ``1/lam``-smooth energy, larger values trade
    stability for speed.

    ``cost_offset`` is the constant that was subtracted from the cost matrix
    before solving (range centering). It is added back when reporting, so the
    trace and the relative-change stop rule see energies in original cost
    units; the iterates themselves are unaffected by any constant cost shift.
    """

    eta: float = 1.0
    max_iters: int = 10000
    stop_rel_tol: float = 1e-3
    trace_every: int = 1
    kernel_mode: bool = False
    cost_offset: float = 0.0

    def __post_init__(self):
        if not self.eta > 0.0:
            raise ValueError("eta must be > 0")
        if self.max_iters < 1:
            raise ValueError("max_iters must be >= 1")
        if not self.stop_rel_tol > 0.0:
            raise ValueError("stop_rel_tol must be > 0")
        if self.trace_every < 1:
            raise ValueError("trace_every must be >= 1")


@dataclass
class SolveTrace:
    """Per-iteration convergence record plus the terminal status."""

    iters: list[int] = field(default_factory=list)
    energy: list[float] = field(default_factory=list)
    smoothed_energy: list[float] = field(default_factory=list)
    plan_cost: list[float] = field(default_factory=list)
    marginal_dev: list[float] = field(default_factory=list)
    wall_ms: list[float] = field(default_factory=list)
    status: str = MAX_ITERS
    failed_iteration: int | None = None
    n_iterations: int = 0

    def append(self, it, e, e_lam, pc, dev, ms):
        if self.iters and it <= self.iters[-1]:
            raise ValueError("iteration indices must be strictly increasing")
        self.iters.append(int(it))
        self.energy.append(float(e))
        self.smoothed_energy.append(float(e_lam))
        self.plan_cost.append(float(pc))
        self.marginal_dev.append(float(dev))
        self.wall_ms.append(float(ms))

    def rows(self):
        return zip(self.iters, self.energy, self.smoothed_energy,
                   self.plan_cost, self.marginal_dev, self.wall_ms)

    def to_csv(self, path) -> None:
        with open(path, "w") as fh:
            fh.write(",".join(TRACE_COLUMNS) + "\n")
            for it, e, e_lam, pc, dev, ms in self.rows():
                fh.write("%d,%s,%s,%s,%s,%s\n"
                         % (it, repr(e), repr(e_lam), repr(pc), repr(dev), repr(ms)))


class FistaResult(NamedTuple):
    potential: Potential
    plan: TransportPlan
    trace: SolveTrace


class SinkhornResult(NamedTuple):
    plan: TransportPlan
    trace: SolveTrace


def _rel_change(current: float, previous: float, floor: float = 1e-300) -> float:
    denom = abs(previous)
    if denom < floor:
        return abs(current - previous)
    return abs(current - previous) / denom


def _lse_rows(mat: np.ndarray) -> np.ndarray:
    mx = mat.max(axis=1)
    return mx + np.log(np.exp(mat - mx[:, None]).sum(axis=1))


def _lse_cols(mat: np.ndarray) -> np.ndarray:
    mx = mat.max(axis=0)
    return mx + np.log(np.exp(mat - mx[None, :]).sum(axis=0))


def fista_solve(
    source: DiscreteMeasure,
    target: DiscreteMeasure,
    cost: CostMatrix,
    lam: float,
    config: FistaConfig = FistaConfig(),
) -> FistaResult:
    """Minimize the smoothed dual energy over the zero-mean hyperplane.

    Iterates, from ``psi0 = z0 = 0`` and ``theta0 = 1``:

        z_{t+1}   = project_H(psi_t - eta * lam * grad(psi_t))
        theta_{t+1} = (1 + sqrt(1 + 4 theta_t^2)) / 2
        psi_{t+1} = z_{t+1} + ((theta_t - 1)/theta_{t+1}) (z_{t+1} - z_t)

    and stops when the relative change of E(psi) drops below
    ``config.stop_rel_tol`` (absolute change if |E| underflows). The returned
    potential is the final proximal point z, which carries the accelerated
    convergence guarantee; the trace rows are evaluated at the momentum
    iterates psi_t.
    """
    if not lam > 0.0:
        raise ValueError("lam must be > 0")
    mu = source.weights
    nu = target.weights
    C = cost.entries
    m, n = C.shape
    if mu.size != m or nu.size != n:
        raise ValueError("measure sizes do not match the cost matrix")
    log_n = math.log(n)
    step = config.eta * lam

    if config.kernel_mode:
        with np.errstate(over="ignore", invalid="ignore", divide="ignore"):
            K = np.exp(-C / lam)

    trace = SolveTrace()
    start = time.perf_counter()

    psi = np.zeros(n)
    z = np.zeros(n)
    theta = 1.0
    e_prev = None
    status = MAX_ITERS
    failed_at = None
    t = 0

    offset = config.cost_offset
    while True:
        # One fused evaluation at psi_t: c-transform row maxima give E, the
        # shifted exponentials give E_lambda, the gradient, and the plan.
        # With true cost = C + offset, E_true(psi) = E_C(psi) - offset.
        vals = psi[None, :] - C
        row_max = vals.max(axis=1)
        e_val = float(mu @ row_max - nu @ psi) - offset
        if config.kernel_mode:
            with np.errstate(over="ignore", invalid="ignore", divide="ignore"):
                v = np.exp(psi / lam)
                kv = K @ v
                grad = v * (K.T @ (mu / kv)) - nu
                e_lam = lam * float(mu @ np.log(kv)) - float(nu @ psi) - lam * log_n - offset
        else:
            weights = np.exp((vals - row_max[:, None]) / lam)
            sums = weights.sum(axis=1)
            grad = (mu / sums) @ weights - nu
            e_lam = e_val + lam * (float(mu @ np.log(sums)) - log_n)

        failed = not (math.isfinite(e_val) and math.isfinite(e_lam)
                      and np.all(np.isfinite(grad)))
        stopping = failed
        if not failed:
            if e_prev is not None and _rel_change(e_val, e_prev) < config.stop_rel_tol:
                status = CONVERGED
                stopping = True
            elif t >= config.max_iters:
                status = MAX_ITERS
                stopping = True

        if stopping or t % config.trace_every == 0:
            if failed:
                pc = dev = float("nan")
            elif config.kernel_mode:
                with np.errstate(over="ignore", invalid="ignore", divide="ignore"):
                    plan_now = (mu / kv)[:, None] * (K * v[None, :])
                pc = float((plan_now * C).sum()) + offset * float(plan_now.sum())
                dev = float(np.abs(plan_now.sum(axis=1) - mu).sum()
                            + np.abs(plan_now.sum(axis=0) - nu).sum())
            else:
                plan_rows = (mu / sums)[:, None] * weights
                pc = float((plan_rows * C).sum()) + offset * float(plan_rows.sum())
                dev = float(np.abs(grad).sum())  # row marginals are exact
            ms = (time.perf_counter() - start) * 1000.0
            trace.append(t, e_val, e_lam, pc, dev, ms)

        if failed:
            status = NUMERICAL_FAILURE
            failed_at = t
            break
        if stopping:
            break

        e_prev = e_val
        z_new = project_H(psi - step * grad)
        theta_new = 0.5 * (1.0 + math.sqrt(1.0 + 4.0 * theta * theta))
        psi = z_new + ((theta - 1.0) / theta_new) * (z_new - z)
        z = z_new
        theta = theta_new
        t += 1

    trace.status = status
    trace.failed_iteration = failed_at
    trace.n_iterations = t
    potential = Potential(project_H(z), normalized=True)
    plan = recover_plan(potential, source, target, cost, lam)
    return FistaResult(potential, plan, trace)


def sinkhorn_solve(
    source: DiscreteMeasure,
    target: DiscreteMeasure,
    cost: CostMatrix,
    lam: float,
    max_iters: int = 10000,
    stop_rel_tol: float = 1e-3,
    kernel_mode: bool = False,
    trace_every: int = 1,
    cost_offset: float = 0.0,
) -> SinkhornResult:
    """Entropic matrix scaling on the kernel ``K = exp(-C/lam)``.

    One iteration is the full round ``u <- mu / (K v)``, ``v <- nu / (K^T u)``
    with plan ``diag(u) K diag(v)``. The default path runs the identical
    recursion on log-scalings (stable for any ``lam > 0``); ``kernel_mode``
    runs the multiplicative form, whose overflow at small ``lam`` is reported
    as a ``numerical_failure`` status carrying the iteration index. Stops when
    the relative change of <P, C> drops below ``stop_rel_tol``; as in
    :class:`FistaConfig`, ``cost_offset`` restores original cost units for the
    trace and the stop metric after range centering.
    """
    if not lam > 0.0:
        raise ValueError("lam must be > 0")
    if max_iters < 1:
        raise ValueError("max_iters must be >= 1")
    mu = source.weights
    nu = target.weights
    C = cost.entries
    m, n = C.shape
    trace = SolveTrace()
    start = time.perf_counter()

    neg_c = -C / lam
    log_mu = np.log(mu)
    log_nu = np.log(nu)
    if kernel_mode:
        with np.errstate(over="ignore", invalid="ignore", divide="ignore"):
            K = np.exp(neg_c)
        v = np.ones(n)
    else:
        alpha = np.zeros(m)
        beta = np.zeros(n)

    plan_entries = np.full((m, n), np.nan)
    pc_prev = None
    status = MAX_ITERS
    failed_at = None
    t = 0

    for t in range(1, max_iters + 1):
        if kernel_mode:
            with np.errstate(over="ignore", invalid="ignore", divide="ignore"):
                u = mu / (K @ v)
                v = nu / (K.T @ u)
                plan_entries = u[:, None] * K * v[None, :]
        else:
            alpha = log_mu - _lse_rows(neg_c + beta[None, :])
            beta = log_nu - _lse_cols(neg_c + alpha[:, None])
            plan_entries = np.exp(neg_c + alpha[:, None] + beta[None, :])

        pc = float((plan_entries * C).sum()) + cost_offset * float(plan_entries.sum())
        dev = float(np.abs(plan_entries.sum(axis=1) - mu).sum()
                    + np.abs(plan_entries.sum(axis=0) - nu).sum())
        failed = not (math.isfinite(pc) and np.all(np.isfinite(plan_entries)))
        stopping = failed
        if not failed:
            if pc_prev is not None and _rel_change(pc, pc_prev) < stop_rel_tol:
                status = CONVERGED
                stopping = True
            elif t == max_iters:
                status = MAX_ITERS
                stopping = True

        if stopping or t % trace_every == 0:
            ms = (time.perf_counter() - start) * 1000.0
            trace.append(t, float("nan"), float("nan"),
                         pc if not failed else float("nan"),
                         dev if not failed else float("nan"), ms)

        if failed:
            status = NUMERICAL_FAILURE
            failed_at = t
            plan_entries = np.zeros((m, n))
            break
        if stopping:
            break
        pc_prev = pc

    trace.status = status
    trace.failed_iteration = failed_at
    trace.n_iterations = t
    return SinkhornResult(TransportPlan(plan_entries), trace)


def corollary9_iteration_bound(psi_star_norm: float, lam: float, epsilon: float) -> int:
    """Iterations sufficient for the accelerated method to bring the smoothed
    energy within ``epsilon`` of its optimum when started from zero:

        t >= sqrt(2 ||psi*||^2 / (lam * epsilon))

    ``psi_star_norm`` is the Euclidean norm of the zero-mean optimizer.
    """
    if not (psi_star_norm > 0.0 and lam > 0.0 and epsilon > 0.0):
        raise ValueError("all arguments must be > 0")
    return math.ceil(math.sqrt(2.0 * psi_star_norm * psi_star_norm / (lam * epsilon)))


def psi_infinity_bound(cost: CostMatrix, target: DiscreteMeasure, lam: float) -> float:
    """Entrywise bound on the smoothed optimizer:

        |psi*_j| <= c_max - lam * log(min_j nu_j)

    Requires strictly positive target weights (guaranteed by measure
    construction).
    """
    if not lam > 0.0:
        raise ValueError("lam must be > 0")
    nu_min = float(target.weights.min())
    if nu_min <= 0.0:
        raise ValueError("target weights must be strictly positive")
    return cost.c_max - lam * math.log(nu_min)
