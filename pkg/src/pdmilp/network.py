"""Communication graphs, consensus primitives and the synchronous round engine."""

from __future__ import annotations

import csv
import io
import logging
import zlib
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import networkx as nx
import numpy as np

from .agent import Agent, AlgoConfig, allocation_update, default_penalty
from .model import Instance, SolutionVector

__all__ = [
    "Graph",
    "TraceRow",
    "RunTrace",
    "make_graph",
    "parse_graph_spec",
    "substream",
    "metropolis_weights",
    "max_consensus",
    "average_consensus",
    "initial_allocations",
    "run_rounds",
]

log = logging.getLogger(__name__)


def substream(seed: int, name: str) -> np.random.Generator:
    """Independent RNG stream for a named component under one master seed."""
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(zlib.crc32(name.encode()),)))


@dataclass(frozen=True)
class Graph:
    n: int
    edges: tuple
    kind: str = ""
    attempts: int = 1

    def __post_init__(self):
        edges = sorted({(min(i, j), max(i, j)) for i, j in self.edges})
        if any(i == j for i, j in edges):
            raise ValueError("self-loops are not allowed")
        if any(not 0 <= i < self.n or not 0 <= j < self.n for i, j in edges):
            raise ValueError("edge endpoint out of range")
        object.__setattr__(self, "edges", tuple(edges))

    @property
    def neighbors(self) -> tuple:
        nb = [[] for _ in range(self.n)]
        for i, j in self.edges:
            nb[i].append(j)
            nb[j].append(i)
        return tuple(tuple(sorted(v)) for v in nb)

    @property
    def degrees(self) -> np.ndarray:
        return np.array([len(v) for v in self.neighbors])

    def to_networkx(self) -> nx.Graph:
        g = nx.Graph()
        g.add_nodes_from(range(self.n))
        g.add_edges_from(self.edges)
        return g

    def is_connected(self) -> bool:
        return self.n == 1 or nx.is_connected(self.to_networkx())

    def diameter(self) -> int:
        return 0 if self.n == 1 else nx.diameter(self.to_networkx())

    def to_dict(self) -> dict:
        return {"n": self.n, "kind": self.kind, "attempts": self.attempts, "edges": [list(e) for e in self.edges]}


def make_graph(kind: str, n: int, seed: int = 0, p: float | None = None, max_attempts: int = 10_000) -> Graph:
    """Connected undirected graph: ``path``, ``cycle``, ``complete`` or ``erdos_renyi``.

    Erdos-Renyi graphs are redrawn from fresh child seeds until connected;
    the number of draws is kept in ``Graph.attempts``.
    """
    if n < 1:
        raise ValueError("need at least one node")
    if kind == "path":
        return Graph(n, [(i, i + 1) for i in range(n - 1)], kind)
    if kind == "cycle":
        edges = [(i, i + 1) for i in range(n - 1)]
        if n > 2:
            edges.append((n - 1, 0))
        return Graph(n, edges, kind)
    if kind == "complete":
        return Graph(n, [(i, j) for i in range(n) for j in range(i + 1, n)], kind)
    if kind in ("erdos", "erdos_renyi"):
        if p is None or not 0 < p <= 1:
            raise ValueError("erdos_renyi needs p in (0, 1]")
        children = np.random.SeedSequence(seed).spawn(max_attempts)
        iu = np.triu_indices(n, k=1)
        for attempt, ss in enumerate(children, start=1):
            rng = np.random.default_rng(ss)
            keep = rng.random(iu[0].size) < p
            g = Graph(n, list(zip(iu[0][keep].tolist(), iu[1][keep].tolist())), f"erdos_renyi({p})", attempt)
            if g.is_connected():
                return g
        raise RuntimeError(f"no connected G({n}, {p}) sample in {max_attempts} attempts")
    raise ValueError(f"unknown graph kind {kind!r}")


def parse_graph_spec(spec: str, n: int, seed: int = 0) -> Graph:
    """``path``, ``cycle``, ``complete`` or ``erdos:<p>``."""
    if spec.startswith("erdos"):
        _, _, p = spec.partition(":")
        if not p:
            raise ValueError("erdos graph spec needs a probability, e.g. erdos:0.1")
        return make_graph("erdos_renyi", n, seed=seed, p=float(p))
    return make_graph(spec, n, seed=seed)


def metropolis_weights(graph: Graph) -> np.ndarray:
    """Symmetric doubly-stochastic weights ``1 / (1 + max(d_i, d_j))`` on edges."""
    deg = graph.degrees
    W = np.zeros((graph.n, graph.n))
    for i, j in graph.edges:
        W[i, j] = W[j, i] = 1.0 / (1.0 + max(deg[i], deg[j]))
    W[np.diag_indices(graph.n)] = 1.0 - W.sum(axis=1)
    return W


def max_consensus(values, graph: Graph, rounds: int | None = None) -> np.ndarray:
    """Each round every node keeps the max over itself and its neighbors.

    After ``diameter`` rounds (the default) every node holds the global max.
    """
    x = np.array(values, dtype=float)
    nb = graph.neighbors
    for _ in range(graph.diameter() if rounds is None else rounds):
        x = np.array([max(x[i], *(x[j] for j in nb[i])) if nb[i] else x[i] for i in range(graph.n)])
    return x


def average_consensus(values, graph: Graph, rounds: int) -> np.ndarray:
    """Linear iteration with Metropolis weights; estimates approach the mean."""
    if rounds < 1:
        raise ValueError("rounds must be >= 1")
    W = metropolis_weights(graph)
    x = np.array(values, dtype=float)
    for _ in range(rounds):
        x = W @ x
    return x


# -- round engine -------------------------------------------------------------


@dataclass
class TraceRow:
    t: int
    y: np.ndarray | None
    mu: np.ndarray | None
    rho: np.ndarray | None
    J_lp: np.ndarray
    x: list | None
    sum_y: np.ndarray
    sum_rho: float
    coupling_slack: np.ndarray | None
    milp_cost: float
    lp_cost_sum: float
    feasible: bool | None
    y_norm: float = np.nan
    mu_norm: float = np.nan


@dataclass
class RunTrace:
    rows: list
    sigma: np.ndarray
    sigma_asy: float
    resource: np.ndarray
    config: dict = field(default_factory=dict)
    graph: dict = field(default_factory=dict)
    final: SolutionVector | None = None
    warnings: list = field(default_factory=list)

    def csv_header(self) -> list:
        S = self.resource.size
        return ["t", "sum_rho_minus_sigma", *[f"coupling_use_{s + 1}" for s in range(S)],
                "milp_cost", "lp_cost_sum", "feasible"]

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(self.csv_header())
        for r in self.rows:
            if r.feasible is None:
                slack = [""] * self.resource.size
                w.writerow([r.t, "", *slack, "", repr(r.lp_cost_sum), ""])
                continue
            w.writerow([
                r.t,
                repr(r.sum_rho - self.sigma_asy),
                *[repr(float(v)) for v in r.coupling_slack],
                repr(r.milp_cost),
                repr(r.lp_cost_sum),
                int(r.feasible),
            ])
        return buf.getvalue()

    def conservation_error(self) -> float:
        target = self.resource - self.sigma
        return max(float(np.max(np.abs(r.sum_y - target), initial=0.0)) for r in self.rows)

    def feasible_from(self) -> int | None:
        """First recorded round after which every recovered solution is feasible."""
        rec = [r for r in self.rows if r.feasible is not None]
        if not rec or not rec[-1].feasible:
            return None
        t0 = rec[-1].t
        for r in reversed(rec):
            if not r.feasible:
                break
            t0 = r.t
        return t0

    def below_restriction_from(self, tol: float = 1e-9) -> int | None:
        """First recorded round after which ``sum rho - sigma_asy <= tol`` holds for good."""
        rec = [r for r in self.rows if r.feasible is not None]
        if not rec or rec[-1].sum_rho - self.sigma_asy > tol:
            return None
        t0 = rec[-1].t
        for r in reversed(rec):
            if r.sum_rho - self.sigma_asy > tol:
                break
            t0 = r.t
        return t0


def initial_allocations(inst: Instance, sigma) -> list:
    """Equal split of the restricted resource ``(b - sigma) / N``."""
    share = (inst.resource - np.broadcast_to(np.asarray(sigma, dtype=float), (inst.S,))) / inst.N
    return [share.copy() for _ in range(inst.N)]


_WORKER = {}


def _worker_init(blocks, config, M):
    _WORKER["agents"] = [Agent(b, config, M) for b in blocks]


def _worker_step(args):
    idx, y, mu0, recover = args
    return _local_step(_WORKER["agents"][idx], y, mu0, recover)


def _local_step(agent: Agent, y, mu0, recover: bool):
    rel = agent.relaxed(y, mu0=mu0)
    lex = agent.recover(y) if recover else None
    return rel, lex


def run_rounds(
    inst: Instance,
    graph: Graph,
    sigma,
    config: AlgoConfig,
    T: int,
    *,
    sigma_asy: float | None = None,
    jobs: int = 1,
    full_state_limit: int = 200,
    y0=None,
) -> RunTrace:
    """Execute ``T`` synchronous rounds of the distributed scheme.

    Every round each agent solves its penalized local LP and (every
    ``config.recovery_every`` rounds) its lexicographic recovery problem at the
    current allocation; multipliers are then exchanged across graph edges and
    allocations updated. ``sigma`` is the applied restriction (scalar or
    per-row); ``sigma_asy`` only shifts the reported ``sum_rho`` column.
    """
    if T < 1:
        raise ValueError("T must be >= 1")
    if graph.n != inst.N:
        raise ValueError(f"graph has {graph.n} nodes, instance has {inst.N} agents")
    sigma_vec = np.broadcast_to(np.asarray(sigma, dtype=float), (inst.S,)).copy()
    M = config.M if config.M is not None else default_penalty(inst)
    ys = initial_allocations(inst, sigma_vec) if y0 is None else [np.array(v, dtype=float) for v in y0]
    mus = [np.zeros(inst.S) for _ in range(inst.N)]
    nb = graph.neighbors
    full = inst.N <= full_state_limit
    rows = []
    last_x = None
    warnings = []
    m_flagged = False

    pool = None
    agents = None
    if jobs > 1:
        pool = ProcessPoolExecutor(max_workers=jobs, initializer=_worker_init, initargs=(inst.blocks, config, M))
    else:
        agents = [Agent(b, config, M) for b in inst.blocks]
    try:
        for t in range(T):
            recover = config.recovery_every > 0 and (t % config.recovery_every == 0 or t == T - 1)
            tasks = [(i, ys[i], mus[i], recover) for i in range(inst.N)]
            try:
                if pool is not None:
                    results = list(pool.map(_worker_step, tasks, chunksize=max(1, inst.N // (4 * jobs))))
                else:
                    results = [_local_step(agents[i], ys[i], mus[i], recover) for i in range(inst.N)]
            except Exception as exc:
                raise RuntimeError(f"round {t}: local solve failed: {exc}") from exc
            mus = [rel.mu for rel, _ in results]
            if not m_flagged:
                busy = [i for i, mu in enumerate(mus) if mu.sum() >= 0.99 * M]
                if busy:
                    m_flagged = True
                    msg = f"round {t}: agent {busy[0]} has sum(mu) >= 0.99 M (M={M:g}); increase M"
                    warnings.append(msg)
                    log.warning(msg)
            J = np.array([rel.J_lp for rel, _ in results])
            y_snapshot = [y.copy() for y in ys]
            row = TraceRow(
                t=t,
                y=np.array(y_snapshot) if full else None,
                mu=np.array(mus) if full else None,
                rho=None,
                J_lp=J,
                x=None,
                sum_y=np.sum(y_snapshot, axis=0),
                sum_rho=np.nan,
                coupling_slack=None,
                milp_cost=np.nan,
                lp_cost_sum=float(J.sum()),
                feasible=None,
                y_norm=float(np.linalg.norm(np.array(y_snapshot))),
                mu_norm=float(np.linalg.norm(np.array(mus))),
            )
            if recover:
                lex = [l for _, l in results]
                xs = [l.x for l in lex]
                usage = sum(b.coupling @ x for b, x in zip(inst.blocks, xs))
                row.rho = np.array([l.rho for l in lex])
                row.sum_rho = float(row.rho.sum())
                row.coupling_slack = inst.resource - usage
                row.milp_cost = float(sum(b.cost @ x for b, x in zip(inst.blocks, xs)))
                row.feasible = bool(np.all(row.coupling_slack >= -1e-6))
                row.x = [x.copy() for x in xs] if full else None
                last_x = xs
            rows.append(row)
            alpha = config.step(t)
            ys = [allocation_update(ys[i], mus[i], [mus[j] for j in nb[i]], alpha) for i in range(inst.N)]
    finally:
        if pool is not None:
            pool.shutdown()
    cfg = config.to_dict()
    cfg["M"] = M
    cfg["T"] = T
    return RunTrace(
        rows=rows,
        sigma=sigma_vec,
        sigma_asy=float(sigma_vec.min()) if sigma_asy is None else float(sigma_asy),
        resource=inst.resource.copy(),
        config=cfg,
        graph=graph.to_dict(),
        final=None if last_x is None else SolutionVector(x=last_x, tag="distributed"),
        warnings=warnings,
    )
