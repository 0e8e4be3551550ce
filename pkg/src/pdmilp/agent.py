"""Per-agent computations of the distributed scheme.

One round at agent i, given its allocation ``y``:

1. solve the penalized local LP
   ``min c'z + M v  s.t.  A z <= y + v 1,  z in conv(X_i),  v >= 0``
   and keep its multiplier ``mu`` on the allocation rows;
2. after the neighbor exchange, move the allocation with
   ``y <- y + alpha * sum_j (mu_i - mu_j)``;
3. recover a mixed-integer point by the lexicographic minimal-violation solve.

conv(X_i) is either represented exactly by a finite generating point set
(``exact_hull``) or avoided altogether by a projected dual subgradient method
driven by the pricing oracle (``inner_subgradient``).
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from .hull import DEFAULT_CAP, HullCapExceeded, hull_points, integer_grid_size, integer_points
from .lp import LinearProgram, solve_lp
from .milp import LexMinResult, lex_min_violation, lex_min_violation_enum, pricing_oracle
from .model import AgentBlock, Instance

__all__ = [
    "StepSchedule",
    "AlgoConfig",
    "AgentState",
    "RelaxedSolution",
    "Agent",
    "default_penalty",
    "project_capped_simplex",
    "solve_relaxed_subproblem",
    "inner_dual_subgradient",
    "allocation_update",
    "local_lp_cost_via_duality",
    "recover_mixed_integer",
]

log = logging.getLogger(__name__)

EXACT_HULL = "exact_hull"
INNER_SUBGRADIENT = "inner_subgradient"


@dataclass(frozen=True)
class StepSchedule:
    """Diminishing step ``alpha0 / (t + 1) ** gamma`` with gamma in (0.5, 1]."""

    alpha0: float = 1.0
    gamma: float = 0.8

    def __post_init__(self):
        if not self.alpha0 > 0:
            raise ValueError("alpha0 must be positive")
        if not 0.5 < self.gamma <= 1.0:
            raise ValueError("gamma must lie in (0.5, 1] for a square-summable, non-summable sequence")

    def __call__(self, t: int) -> float:
        return self.alpha0 / (t + 1) ** self.gamma


@dataclass(frozen=True)
class AlgoConfig:
    M: float | None = None
    delta: float = 0.0
    step: StepSchedule = field(default_factory=StepSchedule)
    mode: str = EXACT_HULL
    inner_iters: int = 200
    inner_step: float | None = None
    eps: float = 1e-6
    recovery_every: int = 1
    hull_cap: int = DEFAULT_CAP
    enum_cap: int = 20_000

    def __post_init__(self):
        if self.M is not None and not self.M > 0:
            raise ValueError("penalty M must be positive")
        if self.delta < 0:
            raise ValueError("delta must be nonnegative")
        if self.inner_iters < 1:
            raise ValueError("inner_iters must be >= 1")
        if self.mode not in (EXACT_HULL, INNER_SUBGRADIENT):
            raise ValueError(f"unknown subproblem mode {self.mode!r}")
        if self.recovery_every < 0:
            raise ValueError("recovery_every must be >= 0")

    def to_dict(self) -> dict:
        return {
            "M": self.M,
            "delta": self.delta,
            "alpha0": self.step.alpha0,
            "gamma": self.step.gamma,
            "mode": self.mode,
            "inner_iters": self.inner_iters,
            "inner_step": self.inner_step,
            "eps": self.eps,
            "recovery_every": self.recovery_every,
            "hull_cap": self.hull_cap,
            "enum_cap": self.enum_cap,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "AlgoConfig":
        d = dict(d)
        step = StepSchedule(d.pop("alpha0", 1.0), d.pop("gamma", 0.8))
        return cls(step=step, **d)


def default_penalty(inst: Instance) -> float:
    """``10 N max_i ||c_i||_1``: heuristic bound on the master multipliers."""
    return 10.0 * inst.N * max(float(np.abs(b.cost).sum()) for b in inst.blocks)


@dataclass
class AgentState:
    y: np.ndarray
    mu: np.ndarray
    z: np.ndarray | None = None
    v: float = 0.0
    rho: float = np.nan
    xi: float = np.nan
    x: np.ndarray | None = None
    J_lp: float = np.nan


@dataclass
class RelaxedSolution:
    z: np.ndarray
    v: float
    mu: np.ndarray
    J_lp: float


def project_capped_simplex(mu, cap: float) -> np.ndarray:
    """Euclidean projection onto ``{mu >= 0, sum(mu) <= cap}``."""
    p = np.maximum(np.asarray(mu, dtype=float), 0.0)
    if p.sum() <= cap:
        return p
    # projection onto the face sum(mu) = cap
    u = np.sort(np.asarray(mu, dtype=float))[::-1]
    css = np.cumsum(u) - cap
    k = np.arange(1, u.size + 1)
    r = np.flatnonzero(u - css / k > 0)[-1]
    return np.maximum(np.asarray(mu, dtype=float) - css[r] / (r + 1), 0.0)


def _hull_lp(points: np.ndarray, block: AgentBlock, y, M: float | None) -> LinearProgram:
    K = points.shape[0]
    AV = block.coupling @ points.T
    cV = points @ block.cost
    if M is None:
        return LinearProgram(c=cV, A_ub=AV, b_ub=y, A_eq=np.ones((1, K)), b_eq=[1.0], lower=0.0, upper=np.inf)
    S = block.S
    c = np.concatenate([cV, [M]])
    A = np.hstack([AV, -np.ones((S, 1))])
    Aeq = np.concatenate([np.ones(K), [0.0]])[None, :]
    return LinearProgram(c=c, A_ub=A, b_ub=y, A_eq=Aeq, b_eq=[1.0], lower=0.0, upper=np.inf)


def solve_relaxed_subproblem(block: AgentBlock, y, M: float, mode: str = EXACT_HULL, *,
                             points=None, inner_iters: int = 200, inner_step=None, mu0=None,
                             hull_cap: int = DEFAULT_CAP) -> RelaxedSolution:
    """Primal-dual solution of the penalized local LP at allocation ``y``."""
    y = np.asarray(y, dtype=float)
    if not M > 0:
        raise ValueError("penalty M must be positive")
    if mode == INNER_SUBGRADIENT:
        mu, value = inner_dual_subgradient(block, y, M, inner_iters, beta0=inner_step, mu0=mu0, points=points)
        z, _ = pricing_oracle(block, mu, points=points)
        v = max(0.0, float(np.max(block.coupling @ z - y, initial=0.0)))
        return RelaxedSolution(z=z, v=v, mu=mu, J_lp=value)
    if points is None:
        points = hull_points(block, hull_cap)
    lp = _hull_lp(points, block, y, M)
    out = solve_lp(lp)
    if not out.optimal:
        raise RuntimeError(f"penalized local LP returned {out.status}")
    lam = out.x[:-1]
    z = points.T @ lam
    v = float(out.x[-1])
    mu = out.dual_ub.copy()
    return RelaxedSolution(z=z, v=v, mu=mu, J_lp=float(out.cost))


def inner_dual_subgradient(block: AgentBlock, y, M: float, K: int, *, beta0=None, mu0=None, points=None):
    """Projected dual subgradient ascent for the penalized local LP.

    The dual function is ``q(mu) = min_{x in X_i} (c + A'mu)'x - mu'y`` on
    ``{mu >= 0, sum(mu) <= M}``; ``A x_bar - y`` is a supergradient. Steps are
    ``beta0 / sqrt(k + 1)``.

    Returns
    -------
    mu : ndarray
        Average of the K post-step iterates.
    value : float
        Larger of ``q(mu)`` and the best ``q`` met along the iterates. Both are
        lower bounds on the local LP cost; the running best converges much
        faster near kinks of ``q`` where the averaged iterate lags behind.
    """
    y = np.asarray(y, dtype=float)
    S = block.S
    if beta0 is None:
        beta0 = M / (1.0 + float(np.abs(block.coupling).sum(axis=1).max(initial=0.0)))
    mu = np.zeros(S) if mu0 is None else project_capped_simplex(mu0, M)
    avg = np.zeros(S)
    best = -np.inf
    for k in range(K):
        xbar, priced = pricing_oracle(block, mu, points=points)
        best = max(best, priced - float(mu @ y))
        mu = project_capped_simplex(mu + beta0 / np.sqrt(k + 1.0) * (block.coupling @ xbar - y), M)
        avg += (mu - avg) / (k + 1)
    return avg, max(best, local_lp_cost_via_duality(block, avg, y, points=points))


def allocation_update(y, mu_self, mu_neighbors, alpha: float) -> np.ndarray:
    """``y + alpha * sum_j (mu_self - mu_j)`` over the neighbors' multipliers."""
    y = np.asarray(y, dtype=float)
    mu_self = np.asarray(mu_self, dtype=float)
    acc = np.zeros_like(y)
    for mu_j in mu_neighbors:
        acc += mu_self - np.asarray(mu_j, dtype=float)
    return y + alpha * acc


def local_lp_cost_via_duality(block: AgentBlock, mu, y, *, points=None) -> float:
    """``min_{x in X_i} (c + A'mu)'x - mu'y``; equals the local LP cost at an optimal mu."""
    mu = np.asarray(mu, dtype=float)
    _, val = pricing_oracle(block, mu, points=points)
    return val - float(mu @ np.asarray(y, dtype=float))


def recover_mixed_integer(block: AgentBlock, y, *, points=None) -> LexMinResult:
    """Lexicographic minimal violation then minimal cost at allocation ``y``.

    ``points`` may hold the full enumeration of a pure-integer X_i, in which
    case the two stages are evaluated directly instead of by branch-and-bound.
    """
    if points is not None:
        return lex_min_violation_enum(points, block, y)
    return lex_min_violation(block, y)


class Agent:
    """Agent-local cache (generating points of conv(X_i)) plus its round step."""

    def __init__(self, block: AgentBlock, config: AlgoConfig, M: float):
        self.block = block
        self.config = config
        self.M = M
        self.points = None
        self.enumeration = None
        if config.mode == EXACT_HULL or block.is_pure_integer:
            try:
                self.points = hull_points(block, config.hull_cap)
            except HullCapExceeded:
                if config.mode == EXACT_HULL:
                    raise
        if block.is_pure_integer and integer_grid_size(block) <= config.enum_cap:
            self.enumeration = integer_points(block, config.enum_cap)

    def relaxed(self, y, mu0=None) -> RelaxedSolution:
        cfg = self.config
        return solve_relaxed_subproblem(
            self.block, y, self.M, cfg.mode, points=self.points, inner_iters=cfg.inner_iters,
            inner_step=cfg.inner_step, mu0=mu0,
        )

    def recover(self, y) -> LexMinResult:
        return recover_mixed_integer(self.block, y, points=self.enumeration)
