"""Dense two-phase primal simplex with dual multipliers.

Problems have the form::

    min  c'x   s.t.  A_ub x <= b_ub,  A_eq x = b_eq,  lower <= x <= upper

Bounds may be infinite. Variables are shifted/split into nonnegative
columns, finite ranges become extra ``<=`` rows, and the resulting standard
form is solved with a full tableau. Dantzig pricing is used until
``5 * (rows + cols)`` pivots, after which Bland's rule takes over so the
method always terminates.

Dual sign convention: multipliers of ``<=`` rows are nonnegative, i.e. the
Lagrangian is ``c'x + lam'(A_ub x - b_ub) + nu'(A_eq x - b_eq)``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = [
    "LinearProgram",
    "LpOutcome",
    "LpCyclingError",
    "DualityReport",
    "solve_lp",
    "lp_duality_report",
]

OPTIMAL = "optimal"
INFEASIBLE = "infeasible"
UNBOUNDED = "unbounded"


class LpCyclingError(RuntimeError):
    """Pivot budget exhausted (should not happen once Bland's rule is active)."""


def _as2d(a, ncols):
    if a is None:
        return np.zeros((0, ncols))
    a = np.asarray(a, dtype=float)
    if a.size == 0:
        return a.reshape(0, ncols)
    return np.atleast_2d(a)


def _as1d(a):
    if a is None:
        return np.zeros(0)
    return np.atleast_1d(np.asarray(a, dtype=float))


@dataclass
class LinearProgram:
    c: np.ndarray
    A_ub: np.ndarray | None = None
    b_ub: np.ndarray | None = None
    A_eq: np.ndarray | None = None
    b_eq: np.ndarray | None = None
    lower: np.ndarray | float | None = 0.0
    upper: np.ndarray | float | None = np.inf

    def __post_init__(self):
        self.c = _as1d(self.c)
        n = self.c.size
        self.A_ub = _as2d(self.A_ub, n)
        self.b_ub = _as1d(self.b_ub)
        self.A_eq = _as2d(self.A_eq, n)
        self.b_eq = _as1d(self.b_eq)
        lo = -np.inf if self.lower is None else self.lower
        hi = np.inf if self.upper is None else self.upper
        self.lower = np.array(np.broadcast_to(np.asarray(lo, dtype=float), (n,)))
        self.upper = np.array(np.broadcast_to(np.asarray(hi, dtype=float), (n,)))
        if self.A_ub.shape != (self.b_ub.size, n):
            raise ValueError(f"A_ub shape {self.A_ub.shape} inconsistent with b_ub ({self.b_ub.size}) and n={n}")
        if self.A_eq.shape != (self.b_eq.size, n):
            raise ValueError(f"A_eq shape {self.A_eq.shape} inconsistent with b_eq ({self.b_eq.size}) and n={n}")

    @property
    def n(self) -> int:
        return self.c.size

    def with_bounds(self, lower, upper) -> "LinearProgram":
        return LinearProgram(self.c, self.A_ub, self.b_ub, self.A_eq, self.b_eq, lower, upper)


@dataclass
class LpOutcome:
    status: str
    x: np.ndarray | None = None
    cost: float = np.nan
    dual_ub: np.ndarray | None = None
    dual_eq: np.ndarray | None = None
    pivots: int = 0

    @property
    def optimal(self) -> bool:
        return self.status == OPTIMAL

    @property
    def dual(self) -> np.ndarray | None:
        """All row multipliers, inequality rows first."""
        if self.dual_ub is None:
            return None
        return np.concatenate([self.dual_ub, self.dual_eq])


class _Tableau:
    """Standard-form data ``min chat'w, Ahat w = bhat, w >= 0`` plus the map back to x."""

    def __init__(self, lp: LinearProgram):
        n = lp.n
        lo, hi = lp.lower, lp.upper
        fin_lo, fin_hi = np.isfinite(lo), np.isfinite(hi)
        shift = np.where(fin_lo, lo, np.where(fin_hi, hi, 0.0))
        # x = shift + T w; free variables get an extra negative column at the end
        free = np.flatnonzero(~fin_lo & ~fin_hi)
        nw = n + free.size
        T = np.zeros((n, nw))
        T[np.arange(n), np.arange(n)] = np.where(fin_lo | ~fin_hi, 1.0, -1.0)
        T[free, n + np.arange(free.size)] = -1.0
        self.T, self.shift, self.nw = T, shift, nw

        ranged = np.flatnonzero(fin_lo & fin_hi)
        m1, m2, mr = lp.A_ub.shape[0], lp.A_eq.shape[0], ranged.size
        self.m1, self.m2, self.mr = m1, m2, mr
        A_ub = lp.A_ub @ T
        b_ub = lp.b_ub - lp.A_ub @ shift
        R = np.zeros((mr, nw))
        R[np.arange(mr), ranged] = 1.0
        rb = hi[ranged] - lo[ranged]
        A_eq = lp.A_eq @ T
        b_eq = lp.b_eq - lp.A_eq @ shift

        m_le = m1 + mr
        m = m_le + m2
        # columns: w | slacks for <= rows
        A = np.zeros((m, nw + m_le))
        A[:m1, :nw] = A_ub
        A[m1:m_le, :nw] = R
        A[m_le:, :nw] = A_eq
        A[:m_le, nw:] = np.eye(m_le)
        b = np.concatenate([b_ub, rb, b_eq])
        flip = np.where(b < 0, -1.0, 1.0)
        self.A = A * flip[:, None]
        self.b = b * flip
        self.flip = flip
        self.chat = np.concatenate([T.T @ lp.c, np.zeros(m_le)])
        self.const = float(lp.c @ shift)
        self.m, self.m_le = m, m_le
        # rows whose slack can start in the basis
        self.slack_basic = np.zeros(m, dtype=bool)
        self.slack_basic[:m_le] = flip[:m_le] > 0


def _run_simplex(tab, basis, ncols, opt_tol, piv_tol, state, max_pivots):
    """Pivot ``tab`` in place over columns ``< ncols``; return 'optimal' or 'unbounded'."""
    m = tab.shape[0] - 1
    bland_after = state["bland_after"]
    while True:
        rc = tab[-1, :ncols]
        if state["pivots"] >= bland_after:
            neg = np.flatnonzero(rc < -opt_tol)
            if neg.size == 0:
                return OPTIMAL
            e = int(neg[0])
        else:
            e = int(np.argmin(rc))
            if rc[e] >= -opt_tol:
                return OPTIMAL
        col = tab[:m, e]
        pos = np.flatnonzero(col > piv_tol)
        if pos.size == 0:
            return UNBOUNDED
        ratios = tab[pos, -1] / col[pos]
        rmin = ratios.min()
        ties = pos[ratios <= rmin + 1e-12 * (1.0 + abs(rmin))]
        r = int(ties[np.argmin(np.asarray(basis)[ties])])
        piv = tab[r, e]
        tab[r] /= piv
        colv = tab[:, e].copy()
        colv[r] = 0.0
        tab -= np.outer(colv, tab[r])
        basis[r] = e
        state["pivots"] += 1
        if state["pivots"] > max_pivots:
            raise LpCyclingError(
                f"simplex exceeded {max_pivots} pivots (rows={m}, cols={ncols}, entering={e}, leaving row={r})"
            )


def solve_lp(
    lp: LinearProgram,
    *,
    feas_tol: float = 1e-7,
    opt_tol: float = 1e-7,
    piv_tol: float = 1e-9,
    max_pivots: int | None = None,
) -> LpOutcome:
    """Solve ``lp`` and return primal, duals and status."""
    if np.any(lp.lower > lp.upper):
        return LpOutcome(INFEASIBLE)
    st = _Tableau(lp)
    m, nA = st.A.shape
    # artificial columns for rows without a usable slack
    art_rows = np.flatnonzero(~st.slack_basic)
    na = art_rows.size
    ncols = nA + na
    tab = np.zeros((m + 1, ncols + 1))
    tab[:m, :nA] = st.A
    tab[art_rows, nA + np.arange(na)] = 1.0
    tab[:m, -1] = st.b
    basis = np.empty(m, dtype=int)
    basis[st.slack_basic] = st.nw + np.flatnonzero(st.slack_basic)
    basis[art_rows] = nA + np.arange(na)
    state = {"pivots": 0, "bland_after": 5 * (m + ncols)}
    if max_pivots is None:
        max_pivots = 50 * (m + ncols) + 1000

    rows = np.arange(m)
    if na:
        # phase 1: minimize the sum of artificials
        tab[-1, :] = 0.0
        tab[-1, nA:ncols] = 1.0
        tab[-1] -= tab[art_rows].sum(axis=0)
        _run_simplex(tab, basis, ncols, opt_tol, piv_tol, state, max_pivots)
        if -tab[-1, -1] > feas_tol * (1.0 + np.abs(st.b).max(initial=0.0)):
            return LpOutcome(INFEASIBLE, pivots=state["pivots"])
        # drive artificials out; drop redundant rows
        keep = np.ones(m, dtype=bool)
        for r in range(m):
            if basis[r] >= nA:
                cand = np.flatnonzero(np.abs(tab[r, :nA]) > 1e-7)
                if cand.size:
                    e = int(cand[np.argmax(np.abs(tab[r, cand]))])
                    tab[r] /= tab[r, e]
                    colv = tab[:, e].copy()
                    colv[r] = 0.0
                    tab -= np.outer(colv, tab[r])
                    basis[r] = e
                else:
                    keep[r] = False
        if not keep.all():
            tab = np.vstack([tab[:m][keep], tab[-1:]])
            basis = basis[keep]
            rows = rows[keep]
        tab = np.delete(tab, np.s_[nA:ncols], axis=1)
        ncols = nA

    # phase 2
    tab[-1, :] = 0.0
    tab[-1, :nA] = st.chat
    tab[-1] -= st.chat[basis] @ tab[:-1]
    status = _run_simplex(tab, basis, ncols, opt_tol, piv_tol, state, max_pivots)
    if status == UNBOUNDED:
        return LpOutcome(UNBOUNDED, pivots=state["pivots"])

    # recompute basic values and duals from the basis matrix for accuracy
    B = st.A[np.ix_(rows, basis)]
    try:
        wB = np.linalg.solve(B, st.b[rows])
        pi = np.linalg.solve(B.T, st.chat[basis])
    except np.linalg.LinAlgError:
        wB = tab[:-1, -1]
        pi = np.linalg.lstsq(B.T, st.chat[basis], rcond=None)[0]
    w = np.zeros(nA)
    w[basis] = wB
    w = np.maximum(w, 0.0)
    x = st.shift + st.T @ w[: st.nw]
    full_pi = np.zeros(st.m)
    full_pi[rows] = pi
    lam = -(full_pi * st.flip)
    dual_ub = np.maximum(lam[: st.m1], 0.0)
    dual_eq = lam[st.m_le :]
    cost = float(lp.c @ x)
    return LpOutcome(OPTIMAL, x=x, cost=cost, dual_ub=dual_ub, dual_eq=dual_eq, pivots=state["pivots"])


@dataclass
class DualityReport:
    primal_inf: float
    dual_inf: float
    comp_slack: float
    gap: float

    def max(self) -> float:
        return max(self.primal_inf, self.dual_inf, self.comp_slack, self.gap)


def lp_duality_report(lp: LinearProgram, outcome: LpOutcome, x=None) -> DualityReport:
    """KKT residuals of ``outcome`` (optionally at a substituted primal ``x``)."""
    if outcome.status != OPTIMAL:
        raise ValueError(f"duality report needs an optimal outcome, got {outcome.status!r}")
    x = outcome.x if x is None else np.asarray(x, dtype=float)
    lam, nu = outcome.dual_ub, outcome.dual_eq
    lo, hi = lp.lower, lp.upper

    slack = lp.b_ub - lp.A_ub @ x
    eq_res = lp.A_eq @ x - lp.b_eq
    primal_inf = max(
        float(np.max(-slack, initial=0.0)),
        float(np.max(np.abs(eq_res), initial=0.0)),
        float(np.max(np.where(np.isfinite(lo), lo - x, 0.0), initial=0.0)),
        float(np.max(np.where(np.isfinite(hi), x - hi, 0.0), initial=0.0)),
    )
    primal_inf = max(primal_inf, 0.0)

    r = lp.c + lp.A_ub.T @ lam + lp.A_eq.T @ nu
    rpos, rneg = np.maximum(r, 0.0), np.maximum(-r, 0.0)
    dual_inf = max(
        float(np.max(-lam, initial=0.0)),
        float(np.max(np.where(np.isfinite(lo), 0.0, rpos), initial=0.0)),
        float(np.max(np.where(np.isfinite(hi), 0.0, rneg), initial=0.0)),
    )

    cs_rows = np.abs(lam * slack)
    cs_lo = np.where(np.isfinite(lo), rpos * np.abs(x - np.where(np.isfinite(lo), lo, 0.0)), 0.0)
    cs_hi = np.where(np.isfinite(hi), rneg * np.abs(np.where(np.isfinite(hi), hi, 0.0) - x), 0.0)
    comp_slack = float(max(np.max(cs_rows, initial=0.0), np.max(cs_lo, initial=0.0), np.max(cs_hi, initial=0.0)))

    # dual objective: min over the box of r'x minus row terms
    box_term = np.where(np.isfinite(lo), rpos * np.where(np.isfinite(lo), lo, 0.0), 0.0) - np.where(
        np.isfinite(hi), rneg * np.where(np.isfinite(hi), hi, 0.0), 0.0
    )
    g = float(-lp.b_ub @ lam - lp.b_eq @ nu + box_term.sum())
    gap = abs(float(lp.c @ x) - g)
    return DualityReport(primal_inf=primal_inf, dual_inf=dual_inf, comp_slack=comp_slack, gap=gap)
