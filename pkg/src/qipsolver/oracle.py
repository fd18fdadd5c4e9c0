"""Exhaustive minimax evaluation of small instances.

The oracle walks the game tree variable by variable in index order with exact
integer arithmetic.  The only shortcut it takes is declaring a node lost once
some existential row cannot be satisfied by any completion.  Optional
memoization keys subgames on (next variable, residual right-hand sides), which
fully determines the remaining game (rows whose variables are all assigned
drop out of the key).
"""

from __future__ import annotations

import enum
import itertools
import math
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .model import FORALL, QipInstance

DEFAULT_CAP = 2 ** 24


class OracleCapExceeded(RuntimeError):
    pass


class OracleStatus(enum.Enum):
    FEASIBLE = "feasible"
    INFEASIBLE = "infeasible"


@dataclass(frozen=True)
class OracleResult:
    status: OracleStatus
    value: Fraction | None
    principal_variation: tuple[int, ...] | None
    optimal_first_stage: frozenset[tuple[int, ...]]
    nodes: int = 0


def enumerate_uncertainty_set(inst: QipInstance, max_vars: int = 20) -> list[tuple[int, ...]]:
    """Every integer universal assignment satisfying ``A_A x <= b_A``, lexicographically."""
    uvars = inst.universal_vars
    if len(uvars) > max_vars:
        raise OracleCapExceeded(f"{len(uvars)} universal variables exceed the cap of {max_vars}")
    if not uvars:
        return [()] if all(r.rhs >= 0 for r in inst.univ_rows) else []
    domains = [range(inst.lower[j], inst.upper[j] + 1) for j in uvars]
    grid = np.array(list(itertools.product(*domains)), dtype=np.int64)
    keep = np.ones(len(grid), dtype=bool)
    pos = {j: k for k, j in enumerate(uvars)}
    for row in inst.univ_rows:
        s = math.lcm(*([a.denominator for _, a in row.coeffs] + [row.rhs.denominator]))
        act = np.zeros(len(grid), dtype=np.int64)
        for j, a in row.coeffs:
            act += int(a * s) * grid[:, pos[j]]
        keep &= act <= int(row.rhs * s)
    return [tuple(int(v) for v in g) for g in grid[keep]]


class _Oracle:
    def __init__(self, inst: QipInstance, memo: bool, cap: int):
        self.inst = inst
        self.n = inst.num_vars
        self.cap = cap
        self.nodes = 0
        self.memo = {} if memo else None
        arr = inst.arrays
        self.A = arr.A_int.tolist()
        self.b = arr.b_int.tolist()
        self.c = arr.c_int.tolist()
        self.scale = arr.obj_scale
        self.lower = list(inst.lower)
        self.upper = list(inst.upper)
        self.univ = [q == FORALL for q in inst.quantifiers]
        self.cols = [[(i, row[j]) for i, row in enumerate(self.A) if row[j]] for j in range(self.n)]
        m = len(self.A)
        # smallest activity of variables j.. per row
        self.min_rest = [[0] * m for _ in range(self.n + 1)]
        for j in range(self.n - 1, -1, -1):
            nxt = list(self.min_rest[j + 1])
            for i, a in self.cols[j]:
                nxt[i] += min(a * self.lower[j], a * self.upper[j])
            self.min_rest[j] = nxt
        # rows whose support lies entirely before j no longer influence the subgame
        last = [max((j for j, a in enumerate(row) if a), default=-1) for row in self.A]
        self.live = [tuple(i for i in range(m) if last[i] >= j) for j in range(self.n + 1)]
        self.system = inst.universal_system
        nu = len(self.system.vars)
        self.free_after = [tuple(range(k + 1, nu)) for k in range(nu)]
        self.x = [0] * self.n

    def dead(self, j: int, residual) -> bool:
        return any(m > r for m, r in zip(self.min_rest[j], residual))

    def solve(self, j: int, residual: tuple[int, ...], ures: tuple[int, ...]):
        """Value (scaled int or ``None`` for loss) and best continuation of the subgame at ``j``.

        ``residual`` and ``ures`` are the remaining right-hand sides of the
        existential and universal systems.
        """
        self.nodes += 1
        if self.nodes > self.cap:
            raise OracleCapExceeded(f"game tree exceeds {self.cap} nodes")
        if self.dead(j, residual):
            return None, None
        if j == self.n:
            return 0, ()
        key = None
        if self.memo is not None:
            key = (j, tuple(residual[i] for i in self.live[j]), ures)
            hit = self.memo.get(key)
            if hit is not None:
                return hit
        univ = self.univ[j]
        best_val, best_tail, found = None, None, False
        for v in range(self.lower[j], self.upper[j] + 1):
            u2 = ures
            if univ:
                k = self.system.pos_of[j]
                u = list(ures)
                for i, a in self.system.col[k]:
                    u[i] -= a * v
                u2 = tuple(u)
                if not self.system._complete(self.free_after[k], u2):
                    continue
            r = list(residual)
            for i, a in self.cols[j]:
                r[i] -= a * v
            self.x[j] = v
            sub, tail = self.solve(j + 1, tuple(r), u2)
            val = None if sub is None else sub + self.c[j] * v
            if not found:
                best_val, best_tail, found = val, (v,) + (tail or ()), True
            elif univ:
                if best_val is not None and (val is None or val > best_val):
                    best_val, best_tail = val, (v,) + (tail or ())
            elif val is not None and (best_val is None or val < best_val):
                best_val, best_tail = val, (v,) + (tail or ())
            if univ and best_val is None:
                break
        if not found:
            raise AssertionError(f"no legal value for universal x{j + 1}")
        out = (best_val, best_tail if best_val is not None else None)
        if key is not None:
            self.memo[key] = out
        return out


def minimax_oracle(inst: QipInstance, memo: bool = False, cap: int = DEFAULT_CAP) -> OracleResult:
    """Exact game value, principal variation and all optimal first-stage moves.

    Ties are broken toward the smallest value so the principal variation is
    reproducible.
    """
    orc = _Oracle(inst, memo, cap)
    first = inst.blocks[0]
    root = tuple(orc.b)
    # universal variables never occur in the first block, so its moves can be
    # enumerated directly
    best = None
    optimal: list[tuple[int, ...]] = []
    pv = None
    domains = [range(inst.lower[j], inst.upper[j] + 1) for j in first]
    for combo in itertools.product(*domains):
        r = list(root)
        cost = 0
        for j, v in zip(first, combo):
            for i, a in orc.cols[j]:
                r[i] -= a * v
            cost += orc.c[j] * v
        orc.x[first.start:first.stop] = combo
        if orc.dead(first.stop, r):
            orc.nodes += 1
            continue
        sub, tail = orc.solve(first.stop, tuple(r), orc.system.rhs)
        if sub is None:
            continue
        val = sub + cost
        if best is None or val < best:
            best, optimal, pv = val, [combo], combo + tail
        elif val == best:
            optimal.append(combo)
    if best is None:
        return OracleResult(OracleStatus.INFEASIBLE, None, None, frozenset(), orc.nodes)
    return OracleResult(OracleStatus.FEASIBLE, Fraction(best, orc.scale), pv, frozenset(optimal), orc.nodes)
