"""Small exact MILP machinery.

Best-first LP-based branch-and-bound (:func:`solve_milp`), an exhaustive
enumeration oracle (:func:`solve_milp_bruteforce`), the pricing oracle over
a block's local set, and the two-stage lexicographic minimal-violation solve
used for mixed-integer recovery.
"""

from __future__ import annotations

import heapq
import itertools
import math
from dataclasses import dataclass

import numpy as np

from .lp import LinearProgram, solve_lp
from .model import AgentBlock

__all__ = [
    "MixedIntegerProgram",
    "MilpOutcome",
    "MilpNodeLimitError",
    "EnumerationCapError",
    "LexMinResult",
    "solve_milp",
    "solve_milp_bruteforce",
    "block_program",
    "pricing_oracle",
    "lex_min_violation",
    "lex_min_violation_enum",
]

INT_TOL = 1e-6
STAGE2_SLACK = 1e-9


@dataclass
class MixedIntegerProgram(LinearProgram):
    integer_idx: tuple = ()

    def __post_init__(self):
        super().__post_init__()
        self.integer_idx = tuple(sorted(int(j) for j in self.integer_idx))

    def relaxation(self, lower=None, upper=None) -> LinearProgram:
        return LinearProgram(
            self.c,
            self.A_ub,
            self.b_ub,
            self.A_eq,
            self.b_eq,
            self.lower if lower is None else lower,
            self.upper if upper is None else upper,
        )


@dataclass
class MilpOutcome:
    status: str
    x: np.ndarray | None = None
    cost: float = np.nan
    node_count: int = 0

    @property
    def optimal(self) -> bool:
        return self.status == "optimal"


class MilpNodeLimitError(RuntimeError):
    def __init__(self, msg, incumbent=None, bound=None):
        super().__init__(msg)
        self.incumbent = incumbent
        self.bound = bound


class EnumerationCapError(ValueError):
    pass


def _cutoff(best_cost):
    if not np.isfinite(best_cost):
        return np.inf
    return best_cost - 1e-9 * (1.0 + abs(best_cost))


def solve_milp(prog: MixedIntegerProgram, node_limit: int = 1_000_000, int_tol: float = INT_TOL) -> MilpOutcome:
    """Branch-and-bound on the LP relaxation.

    Nodes are explored best-first by LP bound (FIFO among ties); the branching
    variable is the most fractional integer coordinate, lowest index first.
    """
    ints = np.array(prog.integer_idx, dtype=int)
    lo0 = prog.lower.copy()
    hi0 = prog.upper.copy()
    if ints.size:
        lo0[ints] = np.ceil(lo0[ints] - int_tol)
        hi0[ints] = np.floor(hi0[ints] + int_tol)
    counter = itertools.count()
    best_x, best_cost = None, np.inf
    nodes = 0

    def relax(lo, hi):
        nonlocal nodes
        nodes += 1
        return solve_lp(prog.relaxation(lo, hi))

    root = relax(lo0, hi0)
    if root.status == "unbounded":
        raise ValueError("LP relaxation is unbounded; the mixed-integer program must be compact")
    heap = []
    if root.optimal:
        heap.append((root.cost, next(counter), lo0, hi0, root.x))
    while heap:
        bound, _, lo, hi, x = heapq.heappop(heap)
        if bound >= _cutoff(best_cost):
            break
        frac = np.abs(x[ints] - np.round(x[ints])) if ints.size else np.zeros(0)
        if frac.size == 0 or frac.max() <= int_tol:
            xs = x.copy()
            if ints.size:
                xs[ints] = np.round(xs[ints])
            best_x, best_cost = xs, float(prog.c @ xs)
            continue
        # most fractional: distance to nearest integer closest to 1/2
        k = int(np.argmax(np.where(frac > int_tol, frac, -1.0)))
        j = int(ints[k])
        hi_down, lo_up = hi.copy(), lo.copy()
        hi_down[j] = math.floor(x[j])
        lo_up[j] = math.ceil(x[j])
        for lo_c, hi_c in ((lo, hi_down), (lo_up, hi)):
            if lo_c[j] > hi_c[j]:
                continue
            if nodes >= node_limit:
                raise MilpNodeLimitError(
                    f"node budget {node_limit} exceeded (incumbent={best_cost}, bound={bound})",
                    incumbent=None if best_x is None else (best_x, best_cost),
                    bound=bound,
                )
            out = relax(lo_c, hi_c)
            if out.optimal and out.cost < _cutoff(best_cost):
                heapq.heappush(heap, (out.cost, next(counter), lo_c, hi_c, out.x))
    if best_x is None:
        return MilpOutcome("infeasible", node_count=nodes)
    return MilpOutcome("optimal", x=best_x, cost=best_cost, node_count=nodes)


def solve_milp_bruteforce(prog: MixedIntegerProgram, cap: int = 100_000, tol: float = 1e-7) -> MilpOutcome:
    """Enumerate every integer assignment; solve the continuous remainder as an LP."""
    ints = list(prog.integer_idx)
    lo = np.ceil(prog.lower[ints] - INT_TOL).astype(np.int64)
    hi = np.floor(prog.upper[ints] + INT_TOL).astype(np.int64)
    if np.any(~np.isfinite(prog.lower[ints])) or np.any(~np.isfinite(prog.upper[ints])):
        raise EnumerationCapError("integer coordinates need finite bounds for enumeration")
    sizes = np.maximum(hi - lo + 1, 0)
    total = int(math.prod(int(s) for s in sizes))
    if total > cap:
        raise EnumerationCapError(f"{total} integer assignments exceed cap {cap}")
    if total == 0:
        return MilpOutcome("infeasible")
    cont = [j for j in range(prog.n) if j not in set(ints)]
    axes = [np.arange(l, h + 1, dtype=float) for l, h in zip(lo, hi)]
    if not cont:
        grid = np.stack([g.ravel() for g in np.meshgrid(*axes, indexing="ij")], axis=1) if axes else np.zeros((1, 0))
        X = np.zeros((grid.shape[0], prog.n))
        X[:, ints] = grid
        ok = np.ones(X.shape[0], dtype=bool)
        if prog.A_ub.shape[0]:
            ok &= np.all(X @ prog.A_ub.T <= prog.b_ub + tol * (1 + np.abs(prog.b_ub)), axis=1)
        if prog.A_eq.shape[0]:
            ok &= np.all(np.abs(X @ prog.A_eq.T - prog.b_eq) <= tol * (1 + np.abs(prog.b_eq)), axis=1)
        if not ok.any():
            return MilpOutcome("infeasible", node_count=total)
        costs = np.where(ok, X @ prog.c, np.inf)
        best = int(np.argmin(costs))
        return MilpOutcome("optimal", x=X[best], cost=float(costs[best]), node_count=total)
    best_x, best_cost = None, np.inf
    for combo in itertools.product(*axes):
        lo_c, hi_c = prog.lower.copy(), prog.upper.copy()
        lo_c[ints] = combo
        hi_c[ints] = combo
        out = solve_lp(prog.relaxation(lo_c, hi_c))
        if out.status == "unbounded":
            raise ValueError("continuous part unbounded; the program must be compact")
        if out.optimal and out.cost < best_cost - 1e-12:
            x = out.x.copy()
            x[ints] = combo
            best_x, best_cost = x, out.cost
    if best_x is None:
        return MilpOutcome("infeasible", node_count=total)
    return MilpOutcome("optimal", x=best_x, cost=float(prog.c @ best_x), node_count=total)


def block_program(block: AgentBlock, cost=None, extra_ub=None, extra_rhs=None, aux: int = 0,
                  aux_lower=-np.inf, aux_upper=np.inf, aux_cost=None) -> MixedIntegerProgram:
    """MIP over X_i with optional extra rows and ``aux`` trailing continuous variables.

    ``extra_ub`` must have ``n_i + aux`` columns; local rows get zero
    coefficients on the auxiliaries.
    """
    n = block.n
    c = np.zeros(n + aux)
    c[:n] = block.cost if cost is None else cost
    if aux_cost is not None:
        c[n:] = aux_cost
    D = np.hstack([block.local_lhs, np.zeros((block.local_lhs.shape[0], aux))])
    rows, rhs = [D], [block.local_rhs]
    if extra_ub is not None:
        rows.append(np.atleast_2d(extra_ub))
        rhs.append(np.atleast_1d(extra_rhs))
    lower = np.concatenate([block.lower, np.broadcast_to(aux_lower, (aux,))])
    upper = np.concatenate([block.upper, np.broadcast_to(aux_upper, (aux,))])
    return MixedIntegerProgram(
        c=c, A_ub=np.vstack(rows), b_ub=np.concatenate(rhs), lower=lower, upper=upper,
        integer_idx=block.integer_idx,
    )


def pricing_oracle(block: AgentBlock, mu, points=None):
    """Minimize ``(c + A' mu)' x`` over X_i; returns ``(x, value)``.

    With ``points`` (any finite subset of X_i whose hull is conv(X_i)) the
    minimum is read off the points, which is exact for a linear objective.
    """
    mu = np.asarray(mu, dtype=float)
    priced = block.cost + block.coupling.T @ mu
    if points is not None:
        vals = points @ priced
        k = int(np.argmin(vals))
        return points[k].copy(), float(vals[k])
    out = solve_milp(block_program(block, cost=priced))
    if not out.optimal:
        raise ValueError("local set X_i is empty")
    return out.x, float(out.cost)


@dataclass
class LexMinResult:
    rho: float
    xi: float
    x: np.ndarray


def lex_min_violation(block: AgentBlock, y) -> LexMinResult:
    """Two-stage lexicographic solve: minimal coupling violation, then cost.

    Stage 1 finds ``rho = min {r >= 0 : A x <= y + r 1, x in X_i}``. Stage 2
    minimizes ``c'x`` over ``A x <= y + (rho + 1e-9) 1, x in X_i``.
    """
    y = np.asarray(y, dtype=float)
    S, n = block.S, block.n
    if S == 0:
        out = solve_milp(block_program(block))
        if not out.optimal:
            raise ValueError("local set X_i is empty")
        return LexMinResult(0.0, out.cost, out.x)
    stage1 = block_program(
        block, cost=np.zeros(n), extra_ub=np.hstack([block.coupling, -np.ones((S, 1))]), extra_rhs=y,
        aux=1, aux_lower=0.0, aux_upper=np.inf, aux_cost=[1.0],
    )
    out1 = solve_milp(stage1)
    if not out1.optimal:
        raise ValueError("local set X_i is empty")
    rho = max(float(out1.x[n]), 0.0)
    slack = STAGE2_SLACK
    while True:
        out2 = solve_milp(block_program(block, extra_ub=block.coupling, extra_rhs=y + rho + slack))
        if out2.optimal:
            return LexMinResult(rho, out2.cost, out2.x)
        if slack > 1e-5:
            raise RuntimeError(f"stage-2 recovery infeasible at rho={rho}")
        slack *= 100.0


def lex_min_violation_enum(points: np.ndarray, block: AgentBlock, y, slack: float = STAGE2_SLACK) -> LexMinResult:
    """Same lexicographic solve over an explicit enumeration of a pure-integer X_i."""
    y = np.asarray(y, dtype=float)
    if block.S:
        viol = np.maximum(np.max(points @ block.coupling.T - y, axis=1), 0.0)
    else:
        viol = np.zeros(points.shape[0])
    rho = float(viol.min())
    cand = np.flatnonzero(viol <= rho + slack)
    costs = points[cand] @ block.cost
    k = int(cand[np.argmin(costs)])
    return LexMinResult(rho, float(points[k] @ block.cost), points[k].copy())
