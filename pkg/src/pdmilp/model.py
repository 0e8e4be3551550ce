"""Constraint-coupled MILP data model.

The problem handled throughout the package is::

    min   sum_i c_i' x_i
    s.t.  sum_i A_i x_i <= b
          x_i in X_i,   X_i = {x : D_i x <= d_i, lower <= x <= upper,
                               x_j integer for j in integer_idx}

Each agent owns one :class:`AgentBlock`; an :class:`Instance` is the list of
blocks plus the shared resource vector ``b``.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

__all__ = [
    "AgentBlock",
    "Instance",
    "SolutionVector",
    "SolutionReport",
    "GeneratorParams",
    "InstanceFormatError",
    "FEAS_TOL",
    "INT_TOL",
    "validate_instance",
    "generate_random",
    "instance_to_dict",
    "instance_from_dict",
    "dumps_instance",
    "loads_instance",
    "save_instance",
    "load_instance",
    "solution_to_dict",
    "solution_from_dict",
    "evaluate_solution",
    "e1",
    "e2",
    "e3",
]

FEAS_TOL = 1e-6
INT_TOL = 1e-6


def _frozen(a, ndim, dtype=float):
    arr = np.array(a, dtype=dtype, copy=True)
    if ndim == 2 and arr.ndim == 1 and arr.size == 0:
        arr = arr.reshape(0, 0)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class AgentBlock:
    """Local data of one agent: cost, coupling matrix and the set X_i."""

    cost: np.ndarray
    coupling: np.ndarray
    local_lhs: np.ndarray
    local_rhs: np.ndarray
    integer_idx: tuple
    lower: np.ndarray
    upper: np.ndarray

    def __post_init__(self):
        cost = _frozen(self.cost, 1)
        n = cost.shape[0]
        coupling = np.array(self.coupling, dtype=float)
        if coupling.ndim == 1:
            coupling = coupling.reshape(-1, n) if coupling.size else np.zeros((0, n))
        lhs = np.array(self.local_lhs, dtype=float)
        if lhs.size == 0:
            lhs = np.zeros((0, n))
        object.__setattr__(self, "cost", cost)
        object.__setattr__(self, "coupling", _frozen(coupling, 2))
        object.__setattr__(self, "local_lhs", _frozen(lhs, 2))
        object.__setattr__(self, "local_rhs", _frozen(np.atleast_1d(self.local_rhs), 1))
        object.__setattr__(self, "integer_idx", tuple(sorted(int(j) for j in self.integer_idx)))
        object.__setattr__(self, "lower", _frozen(np.broadcast_to(self.lower, (n,)), 1))
        object.__setattr__(self, "upper", _frozen(np.broadcast_to(self.upper, (n,)), 1))

    @property
    def n(self) -> int:
        return self.cost.shape[0]

    @property
    def S(self) -> int:
        return self.coupling.shape[0]

    @property
    def is_pure_integer(self) -> bool:
        return len(self.integer_idx) == self.n

    @property
    def continuous_idx(self) -> tuple:
        ints = set(self.integer_idx)
        return tuple(j for j in range(self.n) if j not in ints)

    def contains(self, x, tol: float = FEAS_TOL) -> bool:
        """True if ``x`` lies in X_i (local rows, box and integrality)."""
        x = np.asarray(x, dtype=float)
        if np.any(x < self.lower - tol) or np.any(x > self.upper + tol):
            return False
        if self.local_lhs.shape[0] and np.any(self.local_lhs @ x > self.local_rhs + tol):
            return False
        xi = x[list(self.integer_idx)]
        return bool(np.all(np.abs(xi - np.round(xi)) <= INT_TOL))

    def __eq__(self, other):
        if not isinstance(other, AgentBlock):
            return NotImplemented
        return (
            self.integer_idx == other.integer_idx
            and all(
                np.array_equal(getattr(self, f), getattr(other, f))
                for f in ("cost", "coupling", "local_lhs", "local_rhs", "lower", "upper")
            )
        )

    __hash__ = None


@dataclass(frozen=True, eq=False)
class Instance:
    blocks: tuple
    resource: np.ndarray
    generator: dict | None = field(default=None, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "blocks", tuple(self.blocks))
        object.__setattr__(self, "resource", _frozen(np.atleast_1d(self.resource), 1))

    @property
    def N(self) -> int:
        return len(self.blocks)

    @property
    def S(self) -> int:
        return self.resource.shape[0]

    def __eq__(self, other):
        if not isinstance(other, Instance):
            return NotImplemented
        return (
            np.array_equal(self.resource, other.resource)
            and len(self.blocks) == len(other.blocks)
            and all(a == b for a, b in zip(self.blocks, other.blocks))
        )

    __hash__ = None


@dataclass(frozen=True)
class SolutionVector:
    """Per-agent assignment, tagged with the procedure that produced it."""

    x: tuple
    tag: str = ""

    def __post_init__(self):
        object.__setattr__(self, "x", tuple(_frozen(xi, 1) for xi in self.x))

    def stacked(self) -> np.ndarray:
        return np.concatenate(self.x) if self.x else np.zeros(0)


@dataclass(frozen=True)
class SolutionReport:
    cost: float
    coupling_slack: np.ndarray
    local_feasible: tuple
    integer_ok: tuple

    @property
    def coupling_ok(self) -> bool:
        return bool(np.all(self.coupling_slack >= -FEAS_TOL))

    @property
    def feasible(self) -> bool:
        return self.coupling_ok and all(self.local_feasible) and all(self.integer_ok)


def validate_instance(inst: Instance) -> list[str]:
    """Return every dimension or compactness violation; empty list means ok."""
    out = []
    if inst.N < 1:
        out.append("instance has no blocks (N < 1)")
    S = inst.S
    if not np.all(np.isfinite(inst.resource)):
        out.append("resource has non-finite entries")
    for i, blk in enumerate(inst.blocks):
        n = blk.n
        tag = f"block {i}"
        if blk.coupling.shape != (blk.coupling.shape[0], n):
            out.append(f"{tag}: coupling has {blk.coupling.shape[1]} columns, expected n_i={n}")
        if blk.coupling.shape[0] != S:
            out.append(f"{tag}: resource length != S (coupling has {blk.coupling.shape[0]} rows, resource has {S})")
        m = blk.local_lhs.shape[0]
        if blk.local_lhs.shape[1] != n and m:
            out.append(f"{tag}: local_lhs has {blk.local_lhs.shape[1]} columns, expected n_i={n}")
        if blk.local_rhs.shape[0] != m:
            out.append(f"{tag}: local_rhs length {blk.local_rhs.shape[0]} != local_lhs rows {m}")
        if any(j < 0 or j >= n for j in blk.integer_idx):
            out.append(f"{tag}: integer_idx outside 0..{n - 1}")
        if len(set(blk.integer_idx)) != len(blk.integer_idx):
            out.append(f"{tag}: duplicate entries in integer_idx")
        if not (np.all(np.isfinite(blk.lower)) and np.all(np.isfinite(blk.upper))):
            out.append(f"{tag}: non-compact block (infinite box bound)")
        elif np.any(blk.lower > blk.upper):
            out.append(f"{tag}: lower bound exceeds upper bound")
        for name in ("cost", "coupling", "local_lhs", "local_rhs"):
            if not np.all(np.isfinite(getattr(blk, name))):
                out.append(f"{tag}: {name} has non-finite entries")
    return out


@dataclass(frozen=True)
class GeneratorParams:
    """Numeric model of the random instance generator.

    Defaults reproduce the published setup: 6x2 local matrices with entries
    in [0, 1], right-hand sides in [0, 40], a +-60 box, cost weights in
    [0, 5] and coupling entries in [0, 1]. The first ``n_integer``
    coordinates of every block are integer.
    """

    N: int = 100
    S: int = 10
    seed: int = 0
    local_rows: int = 6
    local_cols: int = 2
    lhs_range: tuple = (0.0, 1.0)
    rhs_range: tuple = (0.0, 40.0)
    cost_weight_range: tuple = (0.0, 5.0)
    coupling_range: tuple = (0.0, 1.0)
    resource_range: tuple = (-600.0, -500.0)
    box: float = 60.0
    n_integer: int = 1

    def check(self) -> None:
        if self.N < 1 or self.S < 0:
            raise ValueError("need N >= 1 and S >= 0")
        if self.local_rows < 0 or self.local_cols < 1:
            raise ValueError("local matrix shape must be rows >= 0, cols >= 1")
        if not 0 <= self.n_integer <= self.local_cols:
            raise ValueError("n_integer must lie in [0, local_cols]")
        if not self.box > 0:
            raise ValueError("box half-width must be positive")
        for name in ("lhs_range", "rhs_range", "cost_weight_range", "coupling_range", "resource_range"):
            lo, hi = getattr(self, name)
            if not lo < hi:
                raise ValueError(f"{name} must satisfy lo < hi, got {(lo, hi)}")

    def to_dict(self) -> dict:
        return {
            "N": self.N,
            "S": self.S,
            "seed": self.seed,
            "local_rows": self.local_rows,
            "local_cols": self.local_cols,
            "lhs_range": list(self.lhs_range),
            "rhs_range": list(self.rhs_range),
            "cost_weight_range": list(self.cost_weight_range),
            "coupling_range": list(self.coupling_range),
            "resource_range": list(self.resource_range),
            "box": self.box,
            "n_integer": self.n_integer,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "GeneratorParams":
        kw = dict(d)
        for k in ("lhs_range", "rhs_range", "cost_weight_range", "coupling_range", "resource_range"):
            if k in kw:
                kw[k] = tuple(kw[k])
        return cls(**kw)


def generate_random(params: GeneratorParams) -> Instance:
    """Draw a random constraint-coupled MILP.

    Per block, ``D`` and ``d`` are uniform in their ranges, a weight vector
    ``w`` is drawn and the cost is set to ``c = D' w``; the coupling matrix
    ``A`` is uniform in ``coupling_range``. The resource ``b`` is drawn last.
    """
    params.check()
    rng = np.random.default_rng(params.seed)
    m, n = params.local_rows, params.local_cols
    blocks = []
    for _ in range(params.N):
        D = rng.uniform(*params.lhs_range, size=(m, n))
        d = rng.uniform(*params.rhs_range, size=m)
        w = rng.uniform(*params.cost_weight_range, size=m)
        A = rng.uniform(*params.coupling_range, size=(params.S, n))
        blocks.append(
            AgentBlock(
                cost=D.T @ w,
                coupling=A,
                local_lhs=D,
                local_rhs=d,
                integer_idx=tuple(range(params.n_integer)),
                lower=np.full(n, -params.box),
                upper=np.full(n, params.box),
            )
        )
    b = rng.uniform(*params.resource_range, size=params.S)
    return Instance(blocks=blocks, resource=b, generator=params.to_dict())


# -- serialization -----------------------------------------------------------


class InstanceFormatError(ValueError):
    """Malformed instance or solution file."""


_BLOCK_KEYS = ("cost", "coupling", "local_lhs", "local_rhs", "integer_idx", "lower", "upper")


def _floats(a) -> list:
    return np.asarray(a, dtype=float).tolist()


def instance_to_dict(inst: Instance) -> dict:
    d = {
        "N": inst.N,
        "S": inst.S,
        "resource": _floats(inst.resource),
        "blocks": [
            {
                "cost": _floats(b.cost),
                "coupling": _floats(b.coupling),
                "local_lhs": _floats(b.local_lhs),
                "local_rhs": _floats(b.local_rhs),
                "integer_idx": list(b.integer_idx),
                "lower": _floats(b.lower),
                "upper": _floats(b.upper),
            }
            for b in inst.blocks
        ],
    }
    if inst.generator is not None:
        d["generator"] = dict(inst.generator)
    return d


def _need(d: dict, key: str, where: str):
    if not isinstance(d, dict):
        raise InstanceFormatError(f"{where}: expected an object, got {type(d).__name__}")
    if key not in d:
        raise InstanceFormatError(f"{where}: missing key {key!r}")
    return d[key]


def instance_from_dict(d: dict) -> Instance:
    resource = _need(d, "resource", "instance")
    raw_blocks = _need(d, "blocks", "instance")
    if not isinstance(raw_blocks, list):
        raise InstanceFormatError("instance: 'blocks' must be a list")
    S = len(resource)
    blocks = []
    for i, rb in enumerate(raw_blocks):
        where = f"blocks[{i}]"
        vals = {k: _need(rb, k, where) for k in _BLOCK_KEYS}
        try:
            n = len(vals["cost"])
            coupling = np.array(vals["coupling"], dtype=float)
            if coupling.size == 0:
                coupling = coupling.reshape(len(vals["coupling"]), n)
            lhs = np.array(vals["local_lhs"], dtype=float)
            if lhs.size == 0:
                lhs = lhs.reshape(0, n)
            blocks.append(
                AgentBlock(
                    cost=vals["cost"],
                    coupling=coupling,
                    local_lhs=lhs,
                    local_rhs=np.array(vals["local_rhs"], dtype=float),
                    integer_idx=vals["integer_idx"],
                    lower=vals["lower"],
                    upper=vals["upper"],
                )
            )
        except (TypeError, ValueError) as exc:
            raise InstanceFormatError(f"{where}: {exc}") from exc
    inst = Instance(blocks=blocks, resource=resource, generator=d.get("generator"))
    for key, expect in (("N", len(blocks)), ("S", S)):
        if key in d and d[key] != expect:
            raise InstanceFormatError(f"instance: {key}={d[key]} but data implies {expect}")
    return inst


def dumps_instance(inst: Instance) -> str:
    return json.dumps(instance_to_dict(inst), indent=1)


def loads_instance(text: str) -> Instance:
    try:
        d = json.loads(text)
    except json.JSONDecodeError as exc:
        raise InstanceFormatError(f"line {exc.lineno}, column {exc.colno}: {exc.msg}") from exc
    return instance_from_dict(d)


def save_instance(inst: Instance, path) -> None:
    Path(path).write_text(dumps_instance(inst))


def load_instance(path) -> Instance:
    return loads_instance(Path(path).read_text())


def solution_to_dict(sol: SolutionVector) -> dict:
    return {"tag": sol.tag, "x": [_floats(xi) for xi in sol.x]}


def solution_from_dict(d: dict) -> SolutionVector:
    x = _need(d, "x", "solution")
    if not isinstance(x, list):
        raise InstanceFormatError("solution: 'x' must be a list of per-agent vectors")
    return SolutionVector(x=[np.atleast_1d(np.array(xi, dtype=float)) for xi in x], tag=d.get("tag", ""))


# -- evaluation --------------------------------------------------------------


def evaluate_solution(inst: Instance, sol: SolutionVector, tol: float = FEAS_TOL) -> SolutionReport:
    """Cost, coupling slack ``b - sum A_i x_i`` and per-agent local checks."""
    if len(sol.x) != inst.N:
        raise ValueError(f"solution has {len(sol.x)} agents, instance has {inst.N}")
    cost = 0.0
    usage = np.zeros(inst.S)
    local_ok, int_ok = [], []
    for i, (blk, x) in enumerate(zip(inst.blocks, sol.x)):
        if x.shape != (blk.n,):
            raise ValueError(f"agent {i}: x has shape {x.shape}, expected ({blk.n},)")
        cost += float(blk.cost @ x)
        usage += blk.coupling @ x
        ok = bool(np.all(x >= blk.lower - tol) and np.all(x <= blk.upper + tol))
        if blk.local_lhs.shape[0]:
            ok = ok and bool(np.all(blk.local_lhs @ x <= blk.local_rhs + tol))
        local_ok.append(ok)
        xi = x[list(blk.integer_idx)]
        int_ok.append(bool(np.all(np.abs(xi - np.round(xi)) <= INT_TOL)))
    return SolutionReport(
        cost=cost,
        coupling_slack=inst.resource - usage,
        local_feasible=tuple(local_ok),
        integer_ok=tuple(int_ok),
    )


# -- canonical fixtures ------------------------------------------------------


def _box_block(c, A, hi):
    c = np.atleast_1d(np.asarray(c, dtype=float))
    return AgentBlock(
        cost=c,
        coupling=np.asarray(A, dtype=float).reshape(-1, c.size),
        local_lhs=np.zeros((0, c.size)),
        local_rhs=np.zeros(0),
        integer_idx=tuple(range(c.size)),
        lower=np.zeros(c.size),
        upper=np.full(c.size, float(hi)),
    )


def e1() -> Instance:
    """Two agents, x_i in {0,1,2}, x_1 + x_2 <= 3, cost -x_1 - x_2."""
    return Instance(blocks=[_box_block([-1.0], [[1.0]], 2) for _ in range(2)], resource=[3.0])


def e2() -> Instance:
    """Two agents, x_i in {0,1}, 0 <= x_1 + x_2 <= 1; restricted LP is empty."""
    return Instance(blocks=[_box_block([-1.0], [[1.0], [-1.0]], 1) for _ in range(2)], resource=[1.0, 0.0])


def e3() -> Instance:
    """Three agents, x_i in {0..5}, sum x_i <= 6, unit costs -1, -2, -3."""
    return Instance(blocks=[_box_block([c], [[1.0]], 5) for c in (-1.0, -2.0, -3.0)], resource=[6.0])
