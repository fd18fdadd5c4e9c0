"""Exact reasoning about the universal constraint system ``A_A x <= b_A``."""

from __future__ import annotations

import math
from typing import Iterator, Mapping

import numpy as np

# Completion searches above this many free universal variables are preceded
# by an LP feasibility check.
LP_PRECHECK_MIN_VARS = 16


class UniversalSystem:
    """Integer-scaled universal rows restricted to the universal variables.

    ``extendible`` answers whether a partial universal assignment can be
    completed to a member of the uncertainty set; answers are memoized on
    (free variables, residual right-hand side).
    """

    def __init__(self, inst):
        self.vars = inst.universal_vars
        self.pos_of = {j: k for k, j in enumerate(self.vars)}
        self.lower = [inst.lower[j] for j in self.vars]
        self.upper = [inst.upper[j] for j in self.vars]
        rows = []
        rhs = []
        for row in inst.univ_rows:
            s = math.lcm(*([a.denominator for _, a in row.coeffs] + [row.rhs.denominator]))
            coeffs = [0] * len(self.vars)
            for j, a in row.coeffs:
                coeffs[self.pos_of[j]] = int(a * s)
            rows.append(coeffs)
            rhs.append(int(row.rhs * s))
        self.rows = rows
        self.rhs = tuple(rhs)
        # per variable: list of (row, coeff) with nonzero coeff
        self.col = [[(i, r[k]) for i, r in enumerate(rows) if r[k]] for k in range(len(self.vars))]
        # per variable, per row: smallest contribution over the domain
        self.min_contrib = [
            {i: min(a * self.lower[k], a * self.upper[k]) for i, a in self.col[k]}
            for k in range(len(self.vars))
        ]
        self._memo: dict = {}
        self.calls = 0

    def residual(self, fixed_pos: Mapping[int, int]) -> tuple[int, ...]:
        r = list(self.rhs)
        for k, v in fixed_pos.items():
            for i, a in self.col[k]:
                r[i] -= a * v
        return tuple(r)

    def extendible(self, fixed: Mapping[int, int]) -> bool:
        """``fixed`` maps variable index -> value for assigned universal variables."""
        self.calls += 1
        if not all(self.lower[self.pos_of[j]] <= v <= self.upper[self.pos_of[j]] for j, v in fixed.items()):
            return False
        if not self.rows:
            return True
        fixed_pos = {self.pos_of[j]: v for j, v in fixed.items()}
        free = tuple(k for k in range(len(self.vars)) if k not in fixed_pos)
        return self._complete(free, self.residual(fixed_pos))

    def state(self, fixed: Mapping[int, int]) -> tuple[tuple[int, ...], tuple[int, ...]]:
        """``(free positions, residual)`` after fixing ``fixed`` (variable index -> value)."""
        fixed_pos = {self.pos_of[j]: v for j, v in fixed.items()}
        free = tuple(k for k in range(len(self.vars)) if k not in fixed_pos)
        return free, self.residual(fixed_pos)

    def extend(self, state, j: int, v: int):
        """State after additionally fixing variable ``j`` to ``v``."""
        free, residual = state
        k = self.pos_of[j]
        r = list(residual)
        for i, a in self.col[k]:
            r[i] -= a * v
        return tuple(f for f in free if f != k), tuple(r)

    def allows(self, state, j: int, v: int) -> bool:
        """Whether fixing free variable ``j`` to ``v`` keeps ``state`` completable."""
        k = self.pos_of[j]
        if not self.lower[k] <= v <= self.upper[k]:
            return False
        if not self.rows:
            return True
        return self._complete(*self.extend(state, j, v))

    def _min_rest(self, free: tuple[int, ...]) -> list[int]:
        need = [0] * len(self.rows)
        for k in free:
            for i, c in self.min_contrib[k].items():
                need[i] += c
        return need

    def _complete(self, free: tuple[int, ...], residual: tuple[int, ...]) -> bool:
        key = (free, residual)
        hit = self._memo.get(key)
        if hit is not None:
            return hit
        need = self._min_rest(free)
        if any(nd > r for nd, r in zip(need, residual)):
            ok = False
        elif not free:
            ok = True
        elif len(free) >= LP_PRECHECK_MIN_VARS and not self._lp_feasible(free, residual):
            ok = False
        else:
            k, rest = free[0], free[1:]
            ok = False
            for v in range(self.lower[k], self.upper[k] + 1):
                r = list(residual)
                for i, a in self.col[k]:
                    r[i] -= a * v
                if self._complete(rest, tuple(r)):
                    ok = True
                    break
        self._memo[key] = ok
        return ok

    def _lp_feasible(self, free: tuple[int, ...], residual: tuple[int, ...]) -> bool:
        from .lp import LinearProgram, LpStatus, solve_lp

        A = np.array([[self.rows[i][k] for k in free] for i in range(len(self.rows))], dtype=float)
        lp = LinearProgram(
            objective=np.zeros(len(free)),
            matrix=A,
            rhs=np.array(residual, dtype=float),
            lower=np.array([self.lower[k] for k in free], dtype=float),
            upper=np.array([self.upper[k] for k in free], dtype=float),
        )
        return solve_lp(lp).status is not LpStatus.INFEASIBLE

    def enumerate(self, limit: int | None = None) -> Iterator[tuple[int, ...]]:
        """All members of the uncertainty set in lexicographic order."""
        n = len(self.vars)
        values = [0] * n

        def rec(k: int, residual: tuple[int, ...]):
            if k == n:
                yield tuple(values)
                return
            rest = tuple(range(k + 1, n))
            for v in range(self.lower[k], self.upper[k] + 1):
                r = list(residual)
                for i, a in self.col[k]:
                    r[i] -= a * v
                r = tuple(r)
                if self._complete(rest, r):
                    values[k] = v
                    yield from rec(k + 1, r)

        if self._complete(tuple(range(n)), self.rhs):
            count = 0
            for s in rec(0, self.rhs):
                count += 1
                if limit is not None and count > limit:
                    raise OverflowError(f"uncertainty set exceeds {limit} scenarios")
                yield s

    def contains(self, scenario) -> bool:
        if len(scenario) != len(self.vars):
            return False
        for k, v in enumerate(scenario):
            if not self.lower[k] <= v <= self.upper[k]:
                return False
        r = self.residual(dict(enumerate(scenario)))
        return all(x >= 0 for x in r)
