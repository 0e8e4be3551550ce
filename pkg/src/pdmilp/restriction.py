"""Coupling-constraint tightening.

For every agent the row lower bounds ``L_i^s = min_{x in X_i} A_i^s x`` and
the point ``x^L_i`` minimizing the largest row gap ``max_s (A_i^s x - L_i^s)``
are computed exactly. The uniform restriction is ``(S + 1)`` times the
largest such gap over agents; the per-row baseline uses the worst-case row
value ``max_{x in X_i} A_i^s x`` scaled by ``S``.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .milp import block_program, solve_milp
from .model import AgentBlock, Instance

__all__ = [
    "RestrictionReport",
    "row_lower_bounds",
    "row_upper_bounds",
    "min_violation_point",
    "local_restriction_term",
    "sigma_asy",
    "sigma_baseline",
    "restriction_report",
]


def _row_extreme(block: AgentBlock, sense: float) -> np.ndarray:
    out = np.empty(block.S)
    for s in range(block.S):
        res = solve_milp(block_program(block, cost=sense * block.coupling[s]))
        if not res.optimal:
            raise ValueError("local set X_i is empty")
        out[s] = sense * res.cost
    return out


def row_lower_bounds(block: AgentBlock) -> np.ndarray:
    """``L_i``: row-wise minimum of ``A_i x`` over X_i."""
    return _row_extreme(block, 1.0)


def row_upper_bounds(block: AgentBlock) -> np.ndarray:
    """Row-wise maximum of ``A_i x`` over X_i."""
    return _row_extreme(block, -1.0)


def min_violation_point(block: AgentBlock, L=None):
    """Solve ``min l s.t. A_i x - L_i <= l 1, x in X_i`` (``l`` free).

    Returns ``(x_L, l_tilde)``.
    """
    if L is None:
        L = row_lower_bounds(block)
    S, n = block.S, block.n
    if S == 0:
        res = solve_milp(block_program(block, cost=np.zeros(n)))
        if not res.optimal:
            raise ValueError("local set X_i is empty")
        return res.x, 0.0
    prog = block_program(
        block, cost=np.zeros(n), extra_ub=np.hstack([block.coupling, -np.ones((S, 1))]), extra_rhs=L,
        aux=1, aux_cost=[1.0],
    )
    res = solve_milp(prog)
    if not res.optimal:
        raise ValueError("local set X_i is empty")
    x = res.x[:n]
    # report the gap actually attained at x rather than the LP's aux value
    return x, float(np.max(block.coupling @ x - L))


def _gap(block: AgentBlock, x, L) -> float:
    g = float(np.max(block.coupling @ x - L))
    # round-off from the row minimizations must not mask an exact zero
    return 0.0 if g <= 1e-9 * (1.0 + float(np.max(np.abs(L)))) else g


def local_restriction_term(block: AgentBlock) -> float:
    """``max_s (A_i^s x^L_i - L_i^s)``: the quantity aggregated by max-consensus."""
    if block.S == 0:
        return 0.0
    L = row_lower_bounds(block)
    x, _ = min_violation_point(block, L)
    return _gap(block, x, L)


@dataclass
class RestrictionReport:
    L: list
    x_L: list
    ell: np.ndarray
    terms: np.ndarray
    sigma_asy: float
    sigma_baseline: np.ndarray
    zero_case: bool

    def to_dict(self) -> dict:
        return {
            "sigma_asy": self.sigma_asy,
            "sigma_baseline": self.sigma_baseline.tolist(),
            "zero_case": self.zero_case,
            "per_agent": [
                {"L": L.tolist(), "x_L": x.tolist(), "ell": float(e), "term": float(t)}
                for L, x, e, t in zip(self.L, self.x_L, self.ell, self.terms)
            ],
        }


def _agent_quantities(block: AgentBlock):
    if block.S == 0:
        return np.zeros(0), np.zeros(0), np.zeros(block.n), 0.0, 0.0
    L = row_lower_bounds(block)
    U = row_upper_bounds(block)
    x, ell = min_violation_point(block, L)
    return L, U, x, ell, _gap(block, x, L)


def _map(fn, items, jobs):
    if jobs and jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as ex:
            return list(ex.map(fn, items))
    return [fn(it) for it in items]


def sigma_asy(inst: Instance, jobs: int = 1):
    """Uniform restriction ``(S+1) max_i max_s (A_i^s x^L_i - L_i^s)``.

    Returns ``(sigma, per_agent_terms)``.
    """
    terms = np.array(_map(local_restriction_term, inst.blocks, jobs))
    return _scale_asy(inst.S, terms), terms


def _scale_asy(S: int, terms: np.ndarray) -> float:
    if terms.size == 0:
        return 0.0
    return float((S + 1) * max(terms.max(), 0.0)) if S else 0.0


def sigma_baseline(inst: Instance, jobs: int = 1) -> np.ndarray:
    """Per-row baseline ``S max_i (max_{x in X_i} A_i^s x - L_i^s)``."""
    gaps = _map(lambda b: row_upper_bounds(b) - row_lower_bounds(b), inst.blocks, jobs)
    if inst.S == 0:
        return np.zeros(0)
    return inst.S * np.max(np.array(gaps), axis=0)


def restriction_report(inst: Instance, jobs: int = 1) -> RestrictionReport:
    rows = _map(_agent_quantities, inst.blocks, jobs)
    L = [r[0] for r in rows]
    terms = np.array([r[4] for r in rows])
    sig = _scale_asy(inst.S, terms)
    base = inst.S * np.max(np.array([r[1] - r[0] for r in rows]), axis=0) if inst.S else np.zeros(0)
    return RestrictionReport(
        L=L,
        x_L=[r[2] for r in rows],
        ell=np.array([r[3] for r in rows]),
        terms=terms,
        sigma_asy=sig,
        sigma_baseline=base,
        zero_case=bool(sig == 0.0),
    )
