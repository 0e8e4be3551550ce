"""Centralized references, integrality census, Slater certificates and bounds.

Everything here is a desk-scale reference computation: the restricted LP is
solved as one stacked program over the generating points of every conv(X_i),
and the MILP optimum comes from branch-and-bound on the stacked instance.
"""

from __future__ import annotations

import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import block_diag

from .agent import _hull_lp
from .hull import DEFAULT_CAP, HullCapExceeded, hull_points
from .lp import LinearProgram, solve_lp
from .milp import MilpOutcome, MixedIntegerProgram, lex_min_violation, solve_milp
from .model import (
    INT_TOL,
    AgentBlock,
    GeneratorParams,
    Instance,
    SolutionReport,
    SolutionVector,
    evaluate_solution,
    generate_random,
)
from .restriction import sigma_asy as compute_sigma_asy
from .restriction import sigma_baseline as compute_sigma_baseline

__all__ = [
    "RestrictedLpResult",
    "MasterSolution",
    "Census",
    "SlaterCertificate",
    "FeasibilityVerdict",
    "BoundReport",
    "CompareRow",
    "stacked_milp",
    "solve_milp_central",
    "solve_restricted_lp_central",
    "subproblem_value",
    "solve_master_central",
    "integrality_census",
    "find_slater_point",
    "check_feasibility",
    "cost_range_sum",
    "asymptotic_bound",
    "finite_time_bound",
    "bound_report",
    "compare_methods",
    "BATCH_COLUMNS",
]

log = logging.getLogger(__name__)


def _sigma_vec(inst: Instance, sigma) -> np.ndarray:
    s = np.broadcast_to(np.asarray(sigma, dtype=float), (inst.S,)).copy()
    if np.any(s < 0):
        raise ValueError("restriction must be nonnegative")
    return s


# -- stacked programs ---------------------------------------------------------


def stacked_milp(inst: Instance, sigma=0.0) -> MixedIntegerProgram:
    """The full coupled MILP as one program (agents' variables concatenated)."""
    sig = _sigma_vec(inst, sigma)
    offsets = np.cumsum([0] + [b.n for b in inst.blocks])
    D = block_diag(*[b.local_lhs for b in inst.blocks]) if inst.blocks else np.zeros((0, 0))
    A = np.hstack([b.coupling for b in inst.blocks])
    ints = [int(o + j) for o, b in zip(offsets, inst.blocks) for j in b.integer_idx]
    return MixedIntegerProgram(
        c=np.concatenate([b.cost for b in inst.blocks]),
        A_ub=np.vstack([D.reshape(-1, offsets[-1]), A]),
        b_ub=np.concatenate([*[b.local_rhs for b in inst.blocks], inst.resource - sig]),
        lower=np.concatenate([b.lower for b in inst.blocks]),
        upper=np.concatenate([b.upper for b in inst.blocks]),
        integer_idx=ints,
    )


def solve_milp_central(inst: Instance, node_limit: int = 200_000) -> MilpOutcome:
    """``J^MILP`` of the coupled problem by branch-and-bound on the stacked program."""
    return solve_milp(stacked_milp(inst), node_limit=node_limit)


def _split(inst: Instance, x) -> list:
    offsets = np.cumsum([0] + [b.n for b in inst.blocks])
    return [np.asarray(x[offsets[i]:offsets[i + 1]], dtype=float) for i in range(inst.N)]


class _Stack:
    """Stacked LP over conv(X_i); each block is either hull points or its relaxation."""

    def __init__(self, inst: Instance, hull_cap: int = DEFAULT_CAP, points=None):
        self.inst = inst
        self.points = []
        self.relaxed = []
        for i, b in enumerate(inst.blocks):
            P = None if points is None else points[i]
            if P is None:
                try:
                    P = hull_points(b, hull_cap)
                except HullCapExceeded:
                    log.warning("agent %d: hull enumeration over cap; using continuous relaxation", i)
            self.points.append(P)
            self.relaxed.append(P is None)
        self.widths = [b.n if P is None else P.shape[0] for b, P in zip(inst.blocks, self.points)]
        self.offsets = np.cumsum([0] + self.widths)

    @property
    def relaxed_hull(self) -> bool:
        return any(self.relaxed)

    def build(self, c_blocks, rhs, zeta_col: bool = False):
        """Rows: coupling (S), then local rows of relaxed blocks; equalities: convexity rows."""
        inst = self.inst
        nvar = int(self.offsets[-1]) + int(zeta_col)
        c = np.zeros(nvar)
        A_c = np.zeros((inst.S, nvar))
        loc_rows, loc_rhs, eq_rows = [], [], []
        lower = np.zeros(nvar)
        upper = np.full(nvar, np.inf)
        for i, (b, P) in enumerate(zip(inst.blocks, self.points)):
            sl = slice(self.offsets[i], self.offsets[i + 1])
            if P is None:
                c[sl] = c_blocks[i]
                A_c[:, sl] = b.coupling
                lower[sl], upper[sl] = b.lower, b.upper
                for r in range(b.local_lhs.shape[0]):
                    row = np.zeros(nvar)
                    row[sl] = b.local_lhs[r]
                    loc_rows.append(row)
                    loc_rhs.append(b.local_rhs[r])
            else:
                c[sl] = P @ c_blocks[i]
                A_c[:, sl] = b.coupling @ P.T
                row = np.zeros(nvar)
                row[sl] = 1.0
                eq_rows.append(row)
        if zeta_col:
            A_c[:, -1] = 1.0
            lower[-1], upper[-1] = -np.inf, np.inf
        return LinearProgram(
            c=c,
            A_ub=np.vstack([A_c, *loc_rows]) if loc_rows else A_c,
            b_ub=np.concatenate([rhs, loc_rhs]),
            A_eq=np.array(eq_rows).reshape(-1, nvar),
            b_eq=np.ones(len(eq_rows)),
            lower=lower,
            upper=upper,
        )

    def decode(self, x) -> list:
        out = []
        for i, P in enumerate(self.points):
            v = x[self.offsets[i]:self.offsets[i + 1]]
            out.append(v.copy() if P is None else P.T @ v)
        return out


@dataclass
class RestrictedLpResult:
    status: str
    z: list | None
    cost: float
    duals: np.ndarray | None
    sigma: np.ndarray
    relaxed_hull: bool = False
    nonunique: bool | None = None

    @property
    def feasible(self) -> bool:
        return self.status == "optimal"


def solve_restricted_lp_central(inst: Instance, sigma=0.0, *, hull_cap: int = DEFAULT_CAP, points=None,
                                check_uniqueness: bool = False) -> RestrictedLpResult:
    """Stacked restricted LP ``min sum c_i'z_i s.t. sum A_i z_i <= b - sigma, z_i in conv(X_i)``.

    The simplex returns a basic solution, so ``z`` is a vertex. With
    ``check_uniqueness`` a second solve under a small deterministic cost
    perturbation flags (never certifies) a non-unique optimum.
    """
    sig = _sigma_vec(inst, sigma)
    st = _Stack(inst, hull_cap, points)
    lp = st.build([b.cost for b in inst.blocks], inst.resource - sig)
    out = solve_lp(lp)
    if out.status == "unbounded":
        raise RuntimeError("restricted LP unbounded; local sets must be compact")
    if not out.optimal:
        return RestrictedLpResult(out.status, None, np.nan, None, sig, st.relaxed_hull)
    z = st.decode(out.x)
    nonunique = None
    if check_uniqueness:
        rng = np.random.default_rng(12345)
        scale = 1e-6 * (1.0 + max(float(np.abs(b.cost).max(initial=0.0)) for b in inst.blocks))
        pert = [b.cost + scale * rng.standard_normal(b.n) for b in inst.blocks]
        alt = solve_lp(st.build(pert, inst.resource - sig))
        nonunique = bool(alt.optimal and any(
            np.max(np.abs(a - b), initial=0.0) > 1e-6 for a, b in zip(st.decode(alt.x), z)
        ))
    return RestrictedLpResult(
        "optimal", z, float(out.cost), out.dual_ub[:inst.S].copy(), sig, st.relaxed_hull, nonunique
    )


def subproblem_value(block: AgentBlock, y, points=None):
    """``p_i(y) = min c'z s.t. A z <= y, z in conv(X_i)``; returns ``(value, z)``.

    Without ``points`` the continuous relaxation of X_i stands in for its hull.
    """
    y = np.asarray(y, dtype=float)
    if points is not None:
        out = solve_lp(_hull_lp(points, block, y, None))
        z = None if not out.optimal else points.T @ out.x
    else:
        out = solve_lp(LinearProgram(
            c=block.cost, A_ub=np.vstack([block.local_lhs, block.coupling]),
            b_ub=np.concatenate([block.local_rhs, y]), lower=block.lower, upper=block.upper,
        ))
        z = out.x if out.optimal else None
    if not out.optimal:
        raise ValueError("allocation not admissible: local subproblem infeasible")
    return float(out.cost), z


@dataclass
class MasterSolution:
    y: list
    p: np.ndarray
    z: list
    cost: float
    relaxed_hull: bool = False


def solve_master_central(inst: Instance, sigma=0.0, *, hull_cap: int = DEFAULT_CAP, points=None) -> MasterSolution:
    """Optimal allocations from the stacked restricted LP.

    ``y_i = A_i z_i + s / N`` where ``s = b - sigma - sum A_i z_i`` is the slack
    split equally, so that ``sum y_i = b - sigma``; ``p_i(y_i)`` is re-solved.
    """
    if points is None:
        points = _points_or_none(inst, hull_cap)
    res = solve_restricted_lp_central(inst, sigma, hull_cap=hull_cap, points=points)
    if not res.feasible:
        raise ValueError(f"restricted LP is {res.status}")
    slack = inst.resource - res.sigma - sum(b.coupling @ z for b, z in zip(inst.blocks, res.z))
    ys = [b.coupling @ z + slack / inst.N for b, z in zip(inst.blocks, res.z)]
    p = np.array([subproblem_value(b, y, P)[0] for b, y, P in zip(inst.blocks, ys, points)])
    return MasterSolution(y=ys, p=p, z=res.z, cost=res.cost, relaxed_hull=res.relaxed_hull)


def _points_or_none(inst: Instance, hull_cap: int = DEFAULT_CAP) -> list:
    out = []
    for b in inst.blocks:
        try:
            out.append(hull_points(b, hull_cap))
        except HullCapExceeded:
            out.append(None)
    return out


# -- census / certificates ----------------------------------------------------


@dataclass
class Census:
    count: int
    integral: tuple
    bound: int
    fractional: tuple = ()

    @property
    def ok(self) -> bool:
        return self.count >= self.bound


def integrality_census(inst: Instance, z, tol: float = INT_TOL) -> Census:
    """Agents whose integer coordinates of ``z_i`` are integral (within ``tol``)."""
    good, bad = [], []
    for i, (b, zi) in enumerate(zip(inst.blocks, z)):
        ints = list(b.integer_idx)
        zi = np.asarray(zi, dtype=float)
        ok = not ints or bool(np.all(np.abs(zi[ints] - np.round(zi[ints])) <= tol))
        (good if ok else bad).append(i)
    return Census(count=len(good), integral=tuple(good), bound=max(inst.N - inst.S - 1, 0), fractional=tuple(bad))


@dataclass
class SlaterCertificate:
    z: list
    zeta: float

    def verify(self, inst: Instance, sigma=0.0, tol: float = 1e-9) -> bool:
        sig = _sigma_vec(inst, sigma)
        slack = inst.resource - sig - sum(b.coupling @ zi for b, zi in zip(inst.blocks, self.z))
        return self.zeta > 0 and abs(float(slack.min()) - self.zeta) <= tol * (1 + abs(self.zeta))


def find_slater_point(inst: Instance, sigma=0.0, *, hull_cap: int = DEFAULT_CAP, points=None,
                      threshold: float = 1e-9) -> SlaterCertificate | None:
    """Maximize the smallest restricted-coupling slack over conv(X_i); None unless positive."""
    if inst.S == 0:
        return None
    sig = _sigma_vec(inst, sigma)
    st = _Stack(inst, hull_cap, points)
    lp = st.build([np.zeros(b.n) for b in inst.blocks], inst.resource - sig, zeta_col=True)
    lp.c[-1] = -1.0
    out = solve_lp(lp)
    if not out.optimal:
        return None
    z = st.decode(out.x)
    zeta = float((inst.resource - sig - sum(b.coupling @ zi for b, zi in zip(inst.blocks, z))).min())
    if zeta <= threshold:
        return None
    return SlaterCertificate(z=z, zeta=zeta)


@dataclass
class FeasibilityVerdict:
    feasible: bool
    report: SolutionReport

    @property
    def cost(self) -> float:
        return self.report.cost


def check_feasibility(inst: Instance, solution, tol: float = 1e-6) -> FeasibilityVerdict:
    """True iff every ``x_i`` lies in X_i and ``sum A_i x_i <= b + tol``."""
    sol = solution if isinstance(solution, SolutionVector) else SolutionVector(x=list(solution))
    rep = evaluate_solution(inst, sol, tol=tol)
    ok = all(rep.local_feasible) and all(rep.integer_ok) and bool(np.all(rep.coupling_slack >= -tol))
    return FeasibilityVerdict(ok, rep)


# -- bounds -------------------------------------------------------------------


def _block_cost_range(block: AgentBlock, P=None) -> float:
    if P is not None:
        v = P @ block.cost
        return float(v.max() - v.min())
    from .milp import block_program

    hi = solve_milp(block_program(block, cost=-block.cost))
    lo = solve_milp(block_program(block))
    if not (hi.optimal and lo.optimal):
        raise ValueError("local set X_i is empty")
    return float(-hi.cost - lo.cost)


def cost_range_sum(inst: Instance, points=None) -> float:
    """``sum_i (max_{X_i} c_i'x - min_{X_i} c_i'x)``."""
    points = points or [None] * inst.N
    return sum(_block_cost_range(b, P) for b, P in zip(inst.blocks, points))


def asymptotic_bound(inst: Instance, y, x, slater: SlaterCertificate, sigma_asy: float, *,
                     z=None, points=None):
    """Asymptotic suboptimality right-hand side at allocations ``y`` and recovered ``x``.

    ``sum_{i in I_frac} (c_i'x_i - p_i(y_i)) + sigma_asy / zeta * sum_i (c_i'zhat_i - p_i(y_i))``
    where ``I_frac`` are the agents whose local LP solution ``z_i`` at ``y_i``
    is not integral (``z`` defaults to the re-solved ``p_i`` minimizers).
    Returns ``(rhs, p, fractional_agents)``.
    """
    points = points or [None] * inst.N
    pz = [subproblem_value(b, yi, P) for b, yi, P in zip(inst.blocks, y, points)]
    p = np.array([v for v, _ in pz])
    if z is None:
        z = [zi for _, zi in pz]
    frac = integrality_census(inst, z).fractional
    first = sum(float(inst.blocks[i].cost @ x[i]) - p[i] for i in frac)
    second = sigma_asy / slater.zeta * sum(
        float(b.cost @ zh) - pi for b, zh, pi in zip(inst.blocks, slater.z, p)
    )
    return first + second, p, frac


def finite_time_bound(inst: Instance, row, slater: SlaterCertificate, sigma_asy: float, delta: float,
                      eps=0.0, *, gamma: float | None = None, points=None) -> float:
    """Finite-time suboptimality right-hand side for one trace row.

    ``sum_i (c_i'x_i^t - J_i^t) + sum_i ||mu_i^t||_1 eps_i + Gamma (sigma_asy + delta)``
    with ``Gamma = cost_range_sum / zeta``.
    """
    if row.x is None or row.mu is None or row.J_lp is None:
        raise ValueError(f"trace row {row.t} lacks x, mu or J_lp (recovery off or state not stored)")
    if gamma is None:
        gamma = cost_range_sum(inst, points) / slater.zeta
    eps = np.broadcast_to(np.asarray(eps, dtype=float), (inst.N,))
    recov = sum(float(b.cost @ xi) for b, xi in zip(inst.blocks, row.x)) - float(np.sum(row.J_lp))
    dual = float(np.sum(np.abs(np.asarray(row.mu)).sum(axis=1) * eps))
    return recov + dual + gamma * (sigma_asy + delta)


@dataclass
class BoundReport:
    J_milp: float
    lp_restricted_cost: float
    asymptotic_bound_rhs: float | None
    finite_time_bound_rhs: list
    Gamma: float | None
    actual_gap: float | None
    p: list = field(default_factory=list)
    fractional_agents: tuple = ()
    zeta: float | None = None
    relaxed_hull: bool = False

    def to_dict(self) -> dict:
        return {
            "J_milp": self.J_milp,
            "lp_restricted_cost": self.lp_restricted_cost,
            "asymptotic_bound_rhs": self.asymptotic_bound_rhs,
            "finite_time_bound_rhs": self.finite_time_bound_rhs,
            "Gamma": self.Gamma,
            "actual_gap": self.actual_gap,
            "p": list(self.p),
            "fractional_agents": list(self.fractional_agents),
            "zeta": self.zeta,
            "relaxed_hull": self.relaxed_hull,
        }


def bound_report(inst: Instance, trace, sigma_asy: float, delta: float, *, J_milp: float | None = None,
                 eps=0.0, node_limit: int = 200_000, hull_cap: int = DEFAULT_CAP) -> BoundReport:
    """Evaluate both bounds on a finished run.

    The finite-time bound is listed as ``[t, rhs, gap]`` for every recorded
    feasible round with stored state; the asymptotic bound uses the last row.
    """
    points = _points_or_none(inst, hull_cap)
    relaxed = any(P is None for P in points)
    if J_milp is None:
        ref = solve_milp_central(inst, node_limit=node_limit)
        J_milp = ref.cost if ref.optimal else np.nan
    sigma = trace.sigma
    lp = solve_restricted_lp_central(inst, sigma, points=points)
    slater = find_slater_point(inst, sigma, points=points)
    rep = BoundReport(J_milp=float(J_milp), lp_restricted_cost=lp.cost, asymptotic_bound_rhs=None,
                      finite_time_bound_rhs=[], Gamma=None, actual_gap=None, relaxed_hull=relaxed)
    last = next((r for r in reversed(trace.rows) if r.x is not None), None)
    if last is not None:
        rep.actual_gap = sum(float(b.cost @ x) for b, x in zip(inst.blocks, last.x)) - J_milp
    if slater is None:
        return rep
    rep.zeta = slater.zeta
    rep.Gamma = cost_range_sum(inst, points) / slater.zeta
    if last is None or last.y is None:
        return rep
    try:
        rhs, p, frac = asymptotic_bound(inst, list(last.y), last.x, slater, sigma_asy, points=points)
        rep.asymptotic_bound_rhs, rep.p, rep.fractional_agents = float(rhs), p.tolist(), frac
    except ValueError as exc:
        log.warning("asymptotic bound skipped: %s", exc)
    for r in trace.rows:
        if r.feasible and r.x is not None and r.mu is not None:
            gap = sum(float(b.cost @ x) for b, x in zip(inst.blocks, r.x)) - J_milp
            rhs = finite_time_bound(inst, r, slater, sigma_asy, delta, eps, gamma=rep.Gamma)
            rep.finite_time_bound_rhs.append([r.t, rhs, gap])
    return rep


# -- batch comparison ---------------------------------------------------------

BATCH_COLUMNS = (
    "instance_id",
    "ours_applicable",
    "baseline_applicable",
    "gap_present",
    "rel_subopt_ours",
    "rel_subopt_baseline",
    "rel_restriction_ours",
    "rel_restriction_baseline",
)


@dataclass
class CompareRow:
    instance_id: int
    ours_applicable: bool | None = None
    baseline_applicable: bool | None = None
    gap_present: bool | None = None
    rel_subopt_ours: float = np.nan
    rel_subopt_baseline: float = np.nan
    rel_restriction_ours: float = np.nan
    rel_restriction_baseline: float = np.nan
    error: str = ""

    def as_list(self) -> list:
        return [getattr(self, k) for k in BATCH_COLUMNS]


def _recovered_cost(inst: Instance, sigma, points) -> float:
    master = solve_master_central(inst, sigma, points=points)
    xs = [lex_min_violation(b, y).x for b, y in zip(inst.blocks, master.y)]
    verdict = check_feasibility(inst, xs)
    return verdict.cost if verdict.feasible else np.nan


def _compare_one(args) -> CompareRow:
    idx, inst, node_limit = args
    row = CompareRow(idx)
    try:
        points = _points_or_none(inst)
        s_asy, _ = compute_sigma_asy(inst)
        s_base = compute_sigma_baseline(inst)
        bnorm = float(np.linalg.norm(inst.resource))
        row.rel_restriction_ours = float(s_asy * np.sqrt(inst.S) / bnorm)
        row.rel_restriction_baseline = float(np.linalg.norm(s_base)) / bnorm
        row.ours_applicable = solve_restricted_lp_central(inst, s_asy, points=points).feasible
        row.baseline_applicable = solve_restricted_lp_central(inst, s_base, points=points).feasible
        ref = solve_milp_central(inst, node_limit=node_limit)
        lp0 = solve_restricted_lp_central(inst, 0.0, points=points)
        if ref.optimal and lp0.feasible:
            row.gap_present = bool(ref.cost - lp0.cost > 1e-6 * (1 + abs(ref.cost)))
            J = ref.cost
            denom = abs(J) if J != 0 else 1.0
            if row.ours_applicable:
                row.rel_subopt_ours = abs(_recovered_cost(inst, s_asy, points) - J) / denom
            if row.baseline_applicable:
                row.rel_subopt_baseline = abs(_recovered_cost(inst, s_base, points) - J) / denom
        elif not ref.optimal:
            row.error = f"MILP {ref.status}"
    except Exception as exc:  # one bad instance must not abort the batch
        row.error = f"{type(exc).__name__}: {exc}"
        log.warning("instance %d: %s", idx, row.error)
    return row


def compare_methods(params: GeneratorParams, count: int, *, jobs: int = 1, node_limit: int = 200_000,
                    instances=None) -> list:
    """Per-instance comparison of the uniform and the per-row baseline restriction.

    Instance ``k`` is generated with seed ``params.seed + k``.
    """
    if instances is None:
        instances = [generate_random(GeneratorParams.from_dict({**params.to_dict(), "seed": params.seed + k}))
                     for k in range(count)]
    tasks = [(k, inst, node_limit) for k, inst in enumerate(instances)]
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as ex:
            return list(ex.map(_compare_one, tasks))
    return [_compare_one(t) for t in tasks]
