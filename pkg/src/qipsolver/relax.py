"""Scenario-based relaxations of a QIP.

Two lower bounds are built here:

* the LP with a fixed scenario: integrality dropped, every universal variable
  pinned to the scenario value;
* the scenario-subset relaxation, written as a deterministic equivalent LP
  (DEP).  Existential variables get one copy per distinct universal prefix
  observed before their block, so scenarios that agree so far share decisions.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .lp import LinearProgram, LpOutcome, LpStatus, solve_lp
from .model import FORALL, Partial, QipInstance

Scenario = tuple[int, ...]


@dataclass(frozen=True)
class ScenarioSet:
    scenarios: tuple[Scenario, ...] = ()
    capacity: int = 0

    def __post_init__(self):
        if len(set(self.scenarios)) != len(self.scenarios):
            raise ValueError("scenario set contains duplicates")

    def __len__(self) -> int:
        return len(self.scenarios)

    def __iter__(self):
        return iter(self.scenarios)


class RelaxStatus(enum.Enum):
    INFEASIBLE = "infeasible"
    BOUND = "bound"


@dataclass(frozen=True, eq=False)
class RelaxationOutcome:
    status: RelaxStatus
    bound: float | None = None
    safe_bound: float | None = None
    first_stage: np.ndarray | None = None
    node_assignment: np.ndarray | None = None
    lp: LpOutcome | None = None

    @property
    def infeasible(self) -> bool:
        return self.status is RelaxStatus.INFEASIBLE


def dedupe(scenarios: Iterable[Scenario]) -> tuple[Scenario, ...]:
    return tuple(dict.fromkeys(tuple(int(v) for v in s) for s in scenarios))


def check_scenario(inst: QipInstance, scenario: Sequence[int]) -> Scenario:
    s = tuple(int(v) for v in scenario)
    if not inst.universal_system.contains(s):
        raise ValueError(f"scenario {s} is not in the uncertainty set")
    return s


def _partial_bounds(inst: QipInstance, partial: Partial | None):
    lo = np.array(inst.lower, dtype=float)
    hi = np.array(inst.upper, dtype=float)
    if partial is not None:
        for j, v in enumerate(partial):
            if v is not None:
                lo[j] = hi[j] = v
    return lo, hi


def fixed_scenario_lp(inst: QipInstance, scenario: Sequence[int], partial: Partial | None = None) -> LinearProgram:
    """LP relaxation with every universal variable fixed to ``scenario``."""
    s = check_scenario(inst, scenario)
    lo, hi = _partial_bounds(inst, partial)
    for k, j in enumerate(inst.universal_vars):
        if partial is not None and partial[j] is not None and partial[j] != s[k]:
            raise ValueError(f"scenario sets x{j + 1}={s[k]} but partial has {partial[j]}")
        lo[j] = hi[j] = s[k]
    arr = inst.arrays
    return LinearProgram(arr.c, arr.A, arr.b, lo, hi)


def plain_lp(inst: QipInstance, partial: Partial | None = None) -> LinearProgram:
    """LP relaxation treating unassigned universal variables as continuous decisions."""
    lo, hi = _partial_bounds(inst, partial)
    arr = inst.arrays
    return LinearProgram(arr.c, arr.A, arr.b, lo, hi)


@dataclass(frozen=True)
class DepMap:
    """Column ``i`` of the DEP is a copy of original variable ``columns[i][0]``
    made after universal prefix ``columns[i][1]``; the last column is ``k``."""

    columns: tuple[tuple[int, Scenario], ...]

    @property
    def k_index(self) -> int:
        return len(self.columns)

    def index(self, var: int, prefix: Scenario) -> int:
        return self.columns.index((var, tuple(prefix)))

    def names(self) -> list[str]:
        out = [f"x{j + 1}" + (f"__{''.join(str(v) for v in p)}" if p else "") for j, p in self.columns]
        return out + ["k"]


def _prefix_lengths(inst: QipInstance) -> list[int]:
    """Number of universal variables preceding each block."""
    out, seen = [], 0
    for b in inst.blocks:
        out.append(seen)
        if b.quantifier == FORALL:
            seen += b.size
    return out


def build_dep(inst: QipInstance, scenarios: ScenarioSet | Sequence[Scenario], partial: Partial | None = None):
    """Deterministic equivalent LP of the relaxation restricted to ``scenarios``.

    Returns ``(LinearProgram, DepMap)``.  The objective is ``min k`` with one
    row ``c x^(s) <= k`` per scenario; universal values enter as constants.
    """
    scen = dedupe(scenarios)
    if not scen:
        raise ValueError("scenario set is empty")
    for s in scen:
        check_scenario(inst, s)
    univ_pos = {j: k for k, j in enumerate(inst.universal_vars)}
    plen = _prefix_lengths(inst)
    block_of = inst.block_of
    ex_vars = inst.existential_vars

    if partial is not None:
        for s in scen:
            for j, k in univ_pos.items():
                if partial[j] is not None and partial[j] != s[k]:
                    raise ValueError(f"scenario {s} conflicts with partial assignment at x{j + 1}")

    col_of: dict[tuple[int, Scenario], int] = {}
    columns: list[tuple[int, Scenario]] = []
    # block-major ordering so copies of one block stay together
    paths = []
    for s in scen:
        path = {}
        for j in ex_vars:
            key = (j, s[: plen[block_of[j]]])
            if key not in col_of:
                col_of[key] = len(columns)
                columns.append(key)
            path[j] = col_of[key]
        paths.append(path)

    ncol = len(columns) + 1
    kcol = ncol - 1
    c = inst.objective
    rows: dict[tuple, None] = {}
    for s, path in zip(scen, paths):
        const = sum(float(c[j]) * s[k] for j, k in univ_pos.items())
        obj = {path[j]: float(c[j]) for j in ex_vars if c[j]}
        obj[kcol] = -1.0
        rows[(tuple(sorted(obj.items())), -const)] = None
        for row in inst.exist_rows:
            coeffs: dict[int, float] = {}
            rhs = float(row.rhs)
            for j, a in row.coeffs:
                if j in univ_pos:
                    rhs -= float(a) * s[univ_pos[j]]
                else:
                    coeffs[path[j]] = coeffs.get(path[j], 0.0) + float(a)
            rows[(tuple(sorted(coeffs.items())), rhs)] = None

    A = np.zeros((len(rows), ncol))
    b = np.zeros(len(rows))
    for i, (coeffs, rhs) in enumerate(rows):
        for col, a in coeffs:
            A[i, col] = a
        b[i] = rhs

    lo = np.zeros(ncol)
    hi = np.zeros(ncol)
    for col, (j, _) in enumerate(columns):
        lo[col], hi[col] = inst.lower[j], inst.upper[j]
        if partial is not None and partial[j] is not None:
            lo[col] = hi[col] = partial[j]
    cf = np.array([float(v) for v in c])
    lo[kcol] = float(np.minimum(cf * inst.lower, cf * np.array(inst.upper)).sum())
    hi[kcol] = float(np.maximum(cf * inst.lower, cf * np.array(inst.upper)).sum())
    obj = np.zeros(ncol)
    obj[kcol] = 1.0
    dmap = DepMap(tuple(columns))
    return LinearProgram(obj, A, b, lo, hi, names=dmap.names()), dmap


def _outcome(inst: QipInstance, lp_out: LpOutcome, first_stage_of, node_assignment_of) -> RelaxationOutcome:
    if lp_out.status is LpStatus.INFEASIBLE:
        return RelaxationOutcome(RelaxStatus.INFEASIBLE, lp=lp_out)
    if lp_out.status is not LpStatus.OPTIMAL:
        raise ArithmeticError(f"relaxation LP ended with status {lp_out.status.value}")
    return RelaxationOutcome(
        RelaxStatus.BOUND,
        bound=lp_out.value,
        safe_bound=lp_out.safe_bound,
        first_stage=first_stage_of(lp_out.point),
        node_assignment=node_assignment_of(lp_out.point),
        lp=lp_out,
    )


def solve_relaxation_lp(inst: QipInstance, lp: LinearProgram) -> RelaxationOutcome:
    """Solve a relaxation over the original variables (fixed-scenario or plain)."""
    first = inst.blocks[0]
    return _outcome(inst, solve_lp(lp), lambda x: x[first.start:first.stop].copy(), lambda x: x.copy())


def solve_dep(inst: QipInstance, scenarios, partial: Partial | None = None) -> RelaxationOutcome:
    lp, dmap = build_dep(inst, scenarios, partial)
    first = inst.blocks[0]
    idx = [dmap.index(j, ()) for j in range(first.start, first.stop)]
    return _outcome(inst, solve_lp(lp), lambda x: x[idx].copy(), lambda x: None)


def solve_merged(inst: QipInstance, scenarios: ScenarioSet | Sequence[Scenario], extra: Sequence[int],
                 partial: Partial | None = None) -> RelaxationOutcome:
    """Relaxation over ``scenarios`` plus one node-specific ``extra`` scenario.

    With an empty set this is exactly the fixed-scenario LP for ``extra``.
    """
    extra = check_scenario(inst, extra)
    scen = dedupe(list(scenarios) + [extra])
    if len(scenarios) == 0:
        return solve_relaxation_lp(inst, fixed_scenario_lp(inst, extra, partial))
    return solve_dep(inst, scen, partial)
