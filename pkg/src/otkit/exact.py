"""Exact discrete optimal transport via the transportation simplex, plus an
independent brute-force oracle that enumerates every spanning-tree basis.

The simplex uses northwest-corner initialization and Dantzig pricing, falling
back to Bland's rule after a run of degenerate pivots so cycling cannot occur.
Instances are solved exactly (up to floating-point rounding); the solver exists
for ground truth, not for speed at large sizes.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .costs import CostMatrix
from .measures import DiscreteMeasure
from .smoothed_dual import TransportPlan

REDUCED_COST_TOL = 1e-10
MASS_BALANCE_TOL = 1e-9
DEFAULT_CELL_CAP = 10**6
_DEGENERATE_STALL = 50


@dataclass(eq=False)
class BasisState:
    """Terminal state of the transportation simplex.

    ``cells`` lists the m+n-1 basic cells (a spanning tree of the bipartite
    supply/demand graph), ``plan`` the basic feasible allocation satisfying all
    marginals, and ``u``/``v`` the dual variables with ``u_i + v_j = c_ij`` on
    basic cells.
    """

    cells: list[tuple[int, int]]
    plan: np.ndarray
    u: np.ndarray
    v: np.ndarray

    def reduced_costs(self, costs: np.ndarray) -> np.ndarray:
        return costs - self.u[:, None] - self.v[None, :]


def northwest_corner(mu: np.ndarray, nu: np.ndarray):
    """Initial basic feasible solution via the northwest-corner rule.

    Returns ``(cells, plan)`` with exactly ``m + n - 1`` basic cells forming a
    staircase (hence a spanning tree); degenerate zero allocations appear when
    a supply and a demand are exhausted simultaneously.
    """
    m, n = mu.size, nu.size
    a = mu.astype(float).copy()
    b = nu.astype(float).copy()
    plan = np.zeros((m, n))
    cells = []
    i = j = 0
    while True:
        x = min(a[i], b[j])
        plan[i, j] = x
        cells.append((i, j))
        a[i] -= x
        b[j] -= x
        if i == m - 1 and j == n - 1:
            break
        if a[i] <= b[j] and i < m - 1:
            i += 1
        elif j < n - 1:
            j += 1
        else:
            i += 1
    return cells, plan


def _tree_duals(cells, m: int, n: int, costs: np.ndarray):
    """Dual variables from a spanning-tree basis: fix u_0 = 0 and propagate
    u_i + v_j = c_ij along tree edges."""
    row_adj = [[] for _ in range(m)]
    col_adj = [[] for _ in range(n)]
    for i, j in cells:
        row_adj[i].append(j)
        col_adj[j].append(i)
    u = np.empty(m)
    v = np.empty(n)
    seen_row = np.zeros(m, dtype=bool)
    seen_col = np.zeros(n, dtype=bool)
    u[0] = 0.0
    seen_row[0] = True
    stack = [(0, True)]
    while stack:
        node, is_row = stack.pop()
        if is_row:
            for j in row_adj[node]:
                if not seen_col[j]:
                    v[j] = costs[node, j] - u[node]
                    seen_col[j] = True
                    stack.append((j, False))
        else:
            for i in col_adj[node]:
                if not seen_row[i]:
                    u[i] = costs[i, node] - v[node]
                    seen_row[i] = True
                    stack.append((i, True))
    if not (seen_row.all() and seen_col.all()):
        raise RuntimeError("basis does not span the transportation graph")
    return u, v


def _tree_cycle(cells, m: int, n: int, enter: tuple[int, int]):
    """Alternating cycle closed by the entering cell: the tree path from the
    entering row to the entering column, as a list of basic cells. Even path
    positions receive -theta when the entering cell receives +theta."""
    row_adj = [[] for _ in range(m)]
    col_adj = [[] for _ in range(n)]
    for idx, (i, j) in enumerate(cells):
        row_adj[i].append((j, idx))
        col_adj[j].append((i, idx))
    start = enter[0]
    goal_col = enter[1]
    # BFS over tree nodes: rows are 0..m-1, cols are m..m+n-1.
    parent = {start: None}
    queue = [start]
    while queue:
        node = queue.pop()
        if node < m:
            for j, idx in row_adj[node]:
                if m + j not in parent:
                    parent[m + j] = (node, idx)
                    queue.append(m + j)
        else:
            for i, idx in col_adj[node - m]:
                if i not in parent:
                    parent[i] = (node, idx)
                    queue.append(i)
    node = m + goal_col
    path = []
    while parent[node] is not None:
        prev, idx = parent[node]
        path.append(idx)
        node = prev
    path.reverse()  # now runs from the entering row towards the entering column
    return path


def _resolve_tree_allocation(cells, m: int, n: int, mu: np.ndarray, nu: np.ndarray):
    """Exact allocation on a spanning-tree basis by repeated leaf elimination.

    Recomputing from the marginals removes the rounding drift accumulated by
    pivot updates.
    """
    row_deg = np.zeros(m, dtype=int)
    col_deg = np.zeros(n, dtype=int)
    for i, j in cells:
        row_deg[i] += 1
        col_deg[j] += 1
    remaining_row = mu.astype(float).copy()
    remaining_col = nu.astype(float).copy()
    row_cells = [[] for _ in range(m)]
    col_cells = [[] for _ in range(n)]
    for idx, (i, j) in enumerate(cells):
        row_cells[i].append(idx)
        col_cells[j].append(idx)
    alive = np.ones(len(cells), dtype=bool)
    values = np.zeros(len(cells))
    leaves = [(i, True) for i in range(m) if row_deg[i] == 1]
    leaves += [(j, False) for j in range(n) if col_deg[j] == 1]
    while leaves:
        node, is_row = leaves.pop()
        pool = row_cells[node] if is_row else col_cells[node]
        idx = next((k for k in pool if alive[k]), None)
        if idx is None:
            continue  # node already fully resolved (it was the last endpoint)
        i, j = cells[idx]
        x = remaining_row[i] if is_row else remaining_col[j]
        values[idx] = x
        alive[idx] = False
        remaining_row[i] -= x
        remaining_col[j] -= x
        row_deg[i] -= 1
        col_deg[j] -= 1
        other, other_is_row = (j, False) if is_row else (i, True)
        deg = row_deg[other] if other_is_row else col_deg[other]
        if deg == 1:
            leaves.append((other, other_is_row))
    if alive.any():
        raise RuntimeError("basis is not a tree: leaf elimination stalled")
    plan = np.zeros((m, n))
    for idx, (i, j) in enumerate(cells):
        plan[i, j] = max(values[idx], 0.0)
    return plan


def transportation_simplex(
    mu: np.ndarray,
    nu: np.ndarray,
    costs: np.ndarray,
    opt_tol: float = REDUCED_COST_TOL,
    max_pivots: int | None = None,
) -> BasisState:
    """Solve ``min <P, C>`` over the transportation polytope exactly.

    Dantzig (most negative reduced cost) pricing by default; after
    ``_DEGENERATE_STALL`` consecutive zero-step pivots, entering and leaving
    cells switch to Bland's smallest-index rule until a real step is made,
    which prevents cycling under degeneracy.
    """
    mu = np.asarray(mu, dtype=float)
    nu = np.asarray(nu, dtype=float)
    costs = np.asarray(costs, dtype=float)
    m, n = costs.shape
    if abs(mu.sum() - nu.sum()) > MASS_BALANCE_TOL:
        raise ValueError("total source and target mass must match")
    if max_pivots is None:
        max_pivots = 20 * (m + n) * max(m, n) + 1000

    cells, plan = northwest_corner(mu, nu)
    in_basis = np.zeros((m, n), dtype=bool)
    for i, j in cells:
        in_basis[i, j] = True

    stall = 0
    bland = False
    for _ in range(max_pivots):
        u, v = _tree_duals(cells, m, n, costs)
        reduced = costs - u[:, None] - v[None, :]
        reduced[in_basis] = 0.0
        if bland:
            violating = reduced.ravel() < -opt_tol
            if not violating.any():
                break
            flat = int(np.argmax(violating))
        else:
            flat = int(np.argmin(reduced.ravel()))
            if reduced.ravel()[flat] >= -opt_tol:
                break
        enter = (flat // n, flat % n)

        path = _tree_cycle(cells, m, n, enter)
        minus = path[0::2]
        plus = path[1::2]
        theta = np.inf
        leave_pos = None
        for pos in minus:
            i, j = cells[pos]
            val = plan[i, j]
            better = val < theta - 1e-15
            tie = abs(val - theta) <= 1e-15
            if better or (tie and leave_pos is not None and cells[pos] < cells[leave_pos]):
                theta = min(theta, val)
                leave_pos = pos
        i_l, j_l = cells[leave_pos]

        plan[enter] += theta
        for pos in plus:
            i, j = cells[pos]
            plan[i, j] += theta
        for pos in minus:
            i, j = cells[pos]
            plan[i, j] -= theta
        plan[i_l, j_l] = 0.0

        in_basis[i_l, j_l] = False
        in_basis[enter] = True
        cells[leave_pos] = enter

        if theta <= 1e-15:
            stall += 1
            if stall >= _DEGENERATE_STALL:
                bland = True
        else:
            stall = 0
            bland = False
    else:
        raise RuntimeError("transportation simplex exceeded pivot budget")

    plan = _resolve_tree_allocation(cells, m, n, mu, nu)
    u, v = _tree_duals(cells, m, n, costs)
    return BasisState(list(cells), plan, u, v)


def exact_solve(
    source: DiscreteMeasure,
    target: DiscreteMeasure,
    cost: CostMatrix,
    cell_cap: int = DEFAULT_CELL_CAP,
) -> tuple[TransportPlan, float]:
    """Exact optimal plan and cost via the transportation simplex.

    Refuses instances with more than ``cell_cap`` cells; the oracle exists for
    ground truth at desk scale.
    """
    m, n = cost.shape
    if m * n > cell_cap:
        raise ValueError("instance too large for exact oracle (%d cells > %d)" % (m * n, cell_cap))
    state = transportation_simplex(source.weights, target.weights, cost.entries)
    plan = TransportPlan(state.plan)
    return plan, float((state.plan * cost.entries).sum())


# ---------------------------------------------------------------------------
# Brute-force oracle: enumerate every spanning-tree basis of K_{m,n}.
# ---------------------------------------------------------------------------

_BRUTE_FORCE_LIMIT = 5
_schedule_cache: dict[tuple[int, int], tuple] = {}


def _tree_peel_schedules(m: int, n: int):
    """Peel schedules for all spanning trees of the complete bipartite graph.

    Trees are generated from the classical bijection with sequence pairs
    ``(a, b)``, ``a`` in rows^(n-1), ``b`` in cols^(m-1): repeatedly remove the
    smallest-index leaf (rows 0..m-1 order before cols m..m+n-1); a column leaf
    attaches to the next symbol of ``a``, a row leaf to the next symbol of
    ``b``. The removal order doubles as a leaf-elimination schedule for
    solving the basis allocation, so the returned arrays are all the
    brute-force solver needs:

    ``cells[k, t]``     flat cell index i*n+j of tree k's t-th edge,
    ``leaf[k, t]``      node removed at step t (rows 0..m-1, cols m..m+n-1),
    ``nbr[k, t]``       its neighbor,
    ``last_row[k]``     endpoints of the final edge (also ``cells[k, -1]``).

    Decoded vectorized across all ``m^(n-1) * n^(m-1)`` trees at once.
    """
    key = (m, n)
    if key in _schedule_cache:
        return _schedule_cache[key]

    n_trees = m ** (n - 1) * n ** (m - 1)
    edges = m + n - 1
    idx = np.arange(n_trees)
    b_count = n ** (m - 1)
    a_idx = idx // b_count
    b_idx = idx % b_count
    a = np.empty((n_trees, max(n - 1, 1)), dtype=np.int32)
    rem = a_idx.copy()
    for t in range(n - 1):
        a[:, t] = rem % m
        rem //= m
    b = np.empty((n_trees, max(m - 1, 1)), dtype=np.int32)
    rem = b_idx.copy()
    for t in range(m - 1):
        b[:, t] = rem % n
        rem //= n

    deg = np.ones((n_trees, m + n), dtype=np.int32)
    ar = np.arange(n_trees)
    for t in range(n - 1):
        np.add.at(deg, (ar, a[:, t]), 1)
    for t in range(m - 1):
        np.add.at(deg, (ar, m + b[:, t]), 1)

    alive = np.ones((n_trees, m + n), dtype=bool)
    pa = np.zeros(n_trees, dtype=np.int32)
    pb = np.zeros(n_trees, dtype=np.int32)
    cells = np.empty((n_trees, edges), dtype=np.int32)
    leaf = np.empty((n_trees, max(edges - 1, 1)), dtype=np.int32)
    nbr = np.empty((n_trees, max(edges - 1, 1)), dtype=np.int32)

    for step in range(m + n - 2):
        is_leaf = alive & (deg == 1)
        v = np.argmax(is_leaf, axis=1).astype(np.int32)
        is_col = v >= m
        next_a = a[ar, np.minimum(pa, max(n - 2, 0))] if n > 1 else np.zeros(n_trees, np.int32)
        next_b = b[ar, np.minimum(pb, max(m - 2, 0))] if m > 1 else np.zeros(n_trees, np.int32)
        neighbor = np.where(is_col, next_a, m + next_b).astype(np.int32)
        pa += is_col
        pb += ~is_col
        row = np.where(is_col, neighbor, v)
        col = np.where(is_col, v, neighbor) - m
        cells[:, step] = row * n + col
        leaf[:, step] = v
        nbr[:, step] = neighbor
        alive[ar, v] = False
        deg[ar, v] -= 1
        deg[ar, neighbor] -= 1

    last_row = np.argmax(alive[:, :m], axis=1).astype(np.int32)
    last_col = np.argmax(alive[:, m:], axis=1).astype(np.int32)
    cells[:, edges - 1] = last_row * n + last_col

    schedule = (cells, leaf, nbr, last_row)
    _schedule_cache[key] = schedule
    return schedule


def brute_force_solve(
    source: DiscreteMeasure,
    target: DiscreteMeasure,
    cost: CostMatrix,
    feas_tol: float = 1e-10,
) -> tuple[TransportPlan, float]:
    """Minimum over every basic feasible solution, by exhaustive enumeration.

    Every vertex of the transportation polytope is the unique allocation of
    some spanning-tree basis, so scanning all trees and keeping the cheapest
    feasible allocation is an oracle that shares no code path with the
    simplex. Limited to 5x5 instances.
    """
    m, n = cost.shape
    if m > _BRUTE_FORCE_LIMIT or n > _BRUTE_FORCE_LIMIT:
        raise ValueError("brute force limited to %dx%d" % (_BRUTE_FORCE_LIMIT, _BRUTE_FORCE_LIMIT))
    if abs(source.weights.sum() - target.weights.sum()) > MASS_BALANCE_TOL:
        raise ValueError("total source and target mass must match")

    cells, leaf, nbr, last_row = _tree_peel_schedules(m, n)
    n_trees, edges = cells.shape
    ar = np.arange(n_trees)

    masses = np.empty((n_trees, m + n))
    masses[:, :m] = source.weights
    masses[:, m:] = target.weights
    x = np.empty((n_trees, edges))
    for t in range(m + n - 2):
        xt = masses[ar, leaf[:, t]]
        x[:, t] = xt
        masses[ar, nbr[:, t]] -= xt
    x[:, edges - 1] = masses[ar, last_row]

    tree_costs = (x * cost.entries.ravel()[cells]).sum(axis=1)
    feasible = (x >= -feas_tol).all(axis=1)
    if not feasible.any():
        raise RuntimeError("no feasible basis found (masses inconsistent?)")
    best = int(np.argmin(np.where(feasible, tree_costs, np.inf)))

    plan = np.zeros(m * n)
    plan[cells[best]] = np.maximum(x[best], 0.0)
    return TransportPlan(plan.reshape(m, n)), float(tree_costs[best])
