"""Bounded-variable primal simplex for small dense LPs.

Solves ``min c x + offset  s.t.  A x <= b,  lower <= x <= upper`` with finite
bounds.  A light presolve removes fixed variables, turns singleton rows into
bounds and drops redundant rows before the two-phase simplex runs on what is
left.  Every optimal answer is audited against a Lagrangian dual bound.
"""

from __future__ import annotations

import enum
import logging
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

log = logging.getLogger(__name__)

EPS_FEAS = 1e-7
EPS_OBJ = 1e-7
EPS_PIVOT = 1e-9
EPS_COST = 1e-9
BLAND_AFTER = 1000
REFACTOR_EVERY = 50


class LpStatus(enum.Enum):
    OPTIMAL = "optimal"
    INFEASIBLE = "infeasible"
    UNBOUNDED = "unbounded"
    NUMERICAL = "numerical"


@dataclass(frozen=True, eq=False)
class LinearProgram:
    objective: np.ndarray
    matrix: np.ndarray
    rhs: np.ndarray
    lower: np.ndarray
    upper: np.ndarray
    fixings: Mapping[int, float] = field(default_factory=dict)
    offset: float = 0.0
    names: Sequence[str] | None = None

    def __post_init__(self):
        n = len(self.objective)
        m = len(self.rhs)
        A = np.asarray(self.matrix, dtype=float).reshape(m, n)
        object.__setattr__(self, "matrix", A)
        for name in ("objective", "rhs", "lower", "upper"):
            object.__setattr__(self, name, np.asarray(getattr(self, name), dtype=float))
        if self.lower.shape != (n,) or self.upper.shape != (n,):
            raise ValueError(f"bounds must have length {n}")
        if self.names is not None and len(self.names) != n:
            raise ValueError(f"names must have length {n}")

    @property
    def num_vars(self) -> int:
        return len(self.objective)

    @property
    def num_rows(self) -> int:
        return len(self.rhs)

    def effective_bounds(self) -> tuple[np.ndarray, np.ndarray]:
        lo = self.lower.copy()
        hi = self.upper.copy()
        for j, v in self.fixings.items():
            lo[j] = hi[j] = v
        return lo, hi

    def value_at(self, x: np.ndarray) -> float:
        return float(self.objective @ x) + self.offset


@dataclass(frozen=True, eq=False)
class LpOutcome:
    status: LpStatus
    value: float | None = None
    point: np.ndarray | None = None
    dual_bound: float | None = None
    iterations: int = 0
    conflict_rows: tuple[int, ...] = ()
    basis: object = None

    @property
    def safe_bound(self) -> float:
        """A lower bound robust to round-off: the smaller of primal and dual values."""
        return min(self.value, self.dual_bound)


# ---------------------------------------------------------------------------
# presolve


@dataclass
class _Reduced:
    c: np.ndarray
    A: np.ndarray
    b: np.ndarray
    lo: np.ndarray
    hi: np.ndarray
    cols: np.ndarray  # original indices of remaining columns
    rows: np.ndarray  # original indices of remaining rows
    x: np.ndarray  # full-length values, valid for fixed columns
    const: float


def _presolve(lp: LinearProgram):
    """Return a reduced problem or ``(None, conflict_rows)`` when infeasibility is evident."""
    A = lp.matrix
    lo, hi = lp.effective_bounds()
    if np.any(lo > hi + EPS_FEAS):
        return None, ()
    m, n = A.shape
    row_alive = np.ones(m, dtype=bool)
    col_free = hi - lo > EPS_FEAS
    x = np.where(col_free, lo, (lo + hi) / 2)

    for _ in range(20):
        changed = False
        fixed = ~col_free
        b_eff = lp.rhs - A[:, fixed] @ x[fixed]
        Af = np.where(np.abs(A) > 1e-12, A, 0.0)
        Af[:, fixed] = 0.0
        nnz = np.count_nonzero(Af, axis=1)
        pos = np.where(Af > 0, Af, 0.0)
        neg = np.where(Af < 0, Af, 0.0)
        minact = pos @ lo + neg @ hi
        maxact = pos @ hi + neg @ lo
        tol = EPS_FEAS * np.maximum(1.0, np.abs(b_eff))
        bad = np.flatnonzero(row_alive & (minact > b_eff + tol))
        if bad.size:
            return None, (int(bad[0]),)
        redundant = row_alive & (maxact <= b_eff + tol)
        single = np.flatnonzero(row_alive & ~redundant & (nnz == 1))
        if redundant.any() or single.size:
            changed = True
        row_alive &= ~redundant
        if single.size:
            js = np.argmax(Af[single] != 0, axis=1)
            a = Af[single, js]
            bound = b_eff[single] / a
            up = a > 0
            # snap bounds that cross the opposite bound by less than tol
            new_hi = np.where(bound > lo[js] - tol[single], np.maximum(bound, lo[js]), bound)
            new_lo = np.where(bound < hi[js] + tol[single], np.minimum(bound, hi[js]), bound)
            np.minimum.at(hi, js[up], new_hi[up])
            np.maximum.at(lo, js[~up], new_lo[~up])
            crossed = lo[js] > hi[js] + EPS_FEAS
            if crossed.any():
                return None, (int(single[np.argmax(crossed)]),)
            row_alive[single] = False
        newly_fixed = col_free & (hi - lo <= EPS_FEAS)
        if newly_fixed.any():
            x[newly_fixed] = (lo[newly_fixed] + hi[newly_fixed]) / 2
            col_free &= ~newly_fixed
            changed = True
        if not changed:
            break

    fixed = ~col_free
    x[fixed] = np.clip(x[fixed], np.minimum(lo[fixed], hi[fixed]), hi[fixed])
    cols = np.flatnonzero(col_free)
    rows = np.flatnonzero(row_alive)
    b_eff = lp.rhs[rows] - A[np.ix_(rows, np.flatnonzero(fixed))] @ x[fixed]
    const = float(lp.objective[fixed] @ x[fixed]) + lp.offset
    return _Reduced(
        c=lp.objective[cols],
        A=A[np.ix_(rows, cols)],
        b=b_eff,
        lo=lo[cols],
        hi=hi[cols],
        cols=cols,
        rows=rows,
        x=x,
        const=const,
    ), ()


# ---------------------------------------------------------------------------
# simplex


class _Tableau:
    """Dense tableau over structural, slack and artificial columns."""

    def __init__(self, c, A, b, lo, hi, basis=None):
        m, n = A.shape
        self.m, self.n = m, n
        self.A, self.b = A, b
        xN = np.where(c >= 0, lo, hi)
        s = b - A @ xN
        bad = np.flatnonzero(s < -EPS_FEAS * np.maximum(1.0, np.abs(b)))
        k = len(bad)
        self.k = k
        full = np.zeros((m, n + m + k))
        full[:, :n] = A
        full[:, n:n + m] = np.eye(m)
        for r, i in enumerate(bad):
            full[i, n + m + r] = -1.0
        self.full = full
        self.lo = np.concatenate([lo, np.zeros(m + k)])
        self.hi = np.concatenate([hi, np.full(m, np.inf), np.full(k, np.inf)])
        self.x = np.concatenate([xN, np.maximum(s, 0.0), np.zeros(k)])
        self.basis = np.arange(n, n + m)
        for r, i in enumerate(bad):
            self.basis[i] = n + m + r
            self.x[n + i] = 0.0
            self.x[n + m + r] = -s[i]
        self.is_basic = np.zeros(n + m + k, dtype=bool)
        self.is_basic[self.basis] = True
        self.T = full.copy()
        self.T[bad] *= -1.0
        self.iterations = 0
        self.degenerate = 0
        if basis is not None and k == 0:
            self._try_warm(basis)

    def _try_warm(self, basis):
        basis = np.asarray(basis)
        if basis.shape != (self.m,) or len(set(basis.tolist())) != self.m or basis.max(initial=-1) >= self.n + self.m:
            return
        B = self.full[:, basis]
        try:
            T = np.linalg.solve(B, self.full)
        except np.linalg.LinAlgError:
            return
        is_basic = np.zeros_like(self.is_basic)
        is_basic[basis] = True
        x = self.x.copy()
        slack_nb = np.flatnonzero(~is_basic[self.n:]) + self.n
        x[slack_nb] = 0.0
        nb = np.flatnonzero(~is_basic)
        xB = np.linalg.solve(B, self.b - self.full[:, nb] @ x[nb])
        tol = 1e-9
        if np.any(xB < self.lo[basis] - tol) or np.any(xB > self.hi[basis] + tol):
            return
        x[basis] = xB
        self.T, self.x, self.basis, self.is_basic = T, x, basis.copy(), is_basic

    def refactor(self):
        B = self.full[:, self.basis]
        self.T = np.linalg.solve(B, self.full)
        nb = np.flatnonzero(~self.is_basic)
        self.x[self.basis] = np.linalg.solve(B, self.b - self.full[:, nb] @ self.x[nb])

    def run(self, cost: np.ndarray, max_iter: int) -> LpStatus:
        bland = self.degenerate >= BLAND_AFTER
        since_refactor = 0
        while True:
            if self.iterations >= max_iter:
                return LpStatus.NUMERICAL
            d = cost - cost[self.basis] @ self.T
            at_lo = self.x <= self.lo + EPS_PIVOT
            at_hi = self.x >= self.hi - EPS_PIVOT
            movable = ~self.is_basic & (self.hi - self.lo > EPS_PIVOT)
            up = movable & at_lo & (d < -EPS_COST)
            down = movable & at_hi & (d > EPS_COST)
            cand = np.flatnonzero(up | down)
            if cand.size == 0:
                return LpStatus.OPTIMAL
            if bland:
                q = int(cand[0])
            else:
                q = int(cand[np.argmax(np.abs(d[cand]))])
            direction = 1.0 if up[q] else -1.0
            alpha = self.T[:, q] * direction
            xB = self.x[self.basis]
            loB = self.lo[self.basis]
            hiB = self.hi[self.basis]
            ratios = np.full(self.m, np.inf)
            dec = alpha > EPS_PIVOT
            inc = alpha < -EPS_PIVOT
            ratios[dec] = (xB[dec] - loB[dec]) / alpha[dec]
            ratios[inc] = (hiB[inc] - xB[inc]) / -alpha[inc]
            ratios = np.maximum(ratios, 0.0)
            theta_flip = self.hi[q] - self.lo[q]
            r = -1
            theta = theta_flip
            if self.m:
                rmin = ratios.min()
                if rmin < theta:
                    ties = np.flatnonzero(ratios <= rmin + EPS_PIVOT)
                    if bland:
                        r = int(ties[np.argmin(self.basis[ties])])
                    else:
                        r = int(ties[np.argmax(np.abs(alpha[ties]))])
                    theta = ratios[r]
            if not np.isfinite(theta):
                return LpStatus.UNBOUNDED
            self.iterations += 1
            if theta <= EPS_PIVOT:
                self.degenerate += 1
                if self.degenerate >= BLAND_AFTER:
                    bland = True
            self.x[self.basis] = xB - theta * alpha
            self.x[q] += direction * theta
            if r < 0:
                continue
            leaving = self.basis[r]
            self.x[leaving] = loB[r] if alpha[r] > 0 else hiB[r]
            piv = self.T[r, q]
            self.T[r] /= piv
            col = self.T[:, q].copy()
            col[r] = 0.0
            self.T -= np.outer(col, self.T[r])
            self.basis[r] = q
            self.is_basic[leaving] = False
            self.is_basic[q] = True
            since_refactor += 1
            if since_refactor >= REFACTOR_EVERY:
                self.refactor()
                since_refactor = 0

    def row_duals(self, cost: np.ndarray) -> np.ndarray:
        """``cost_B B^-1``, read off the slack columns."""
        return cost[self.basis] @ self.T[:, self.n:self.n + self.m]


def _dual_bound(c, A, b, lo, hi, mu) -> float:
    """Lagrangian bound ``-mu b + sum_j min(r_j lo_j, r_j hi_j)`` with ``r = c + A^T mu``."""
    r = c + A.T @ mu
    return float(-mu @ b + np.minimum(r * lo, r * hi).sum())


def solve_lp(lp: LinearProgram, basis=None, presolve: bool = True) -> LpOutcome:
    """Solve ``lp`` to optimality.

    ``basis`` is an opaque handle from a previous :class:`LpOutcome`; it is
    used only when it fits the reduced problem and is primal feasible.
    """
    if not (np.all(np.isfinite(lp.lower)) and np.all(np.isfinite(lp.upper))):
        raise ValueError("all variable bounds must be finite")
    n = lp.num_vars
    if presolve:
        red, conflict = _presolve(lp)
        if red is None:
            return LpOutcome(LpStatus.INFEASIBLE, conflict_rows=conflict)
    else:
        lo, hi = lp.effective_bounds()
        if np.any(lo > hi + EPS_FEAS):
            return LpOutcome(LpStatus.INFEASIBLE)
        red = _Reduced(lp.objective, lp.matrix, lp.rhs.copy(), lo, hi, np.arange(n),
                       np.arange(lp.num_rows), lo.copy(), lp.offset)

    m, k = red.A.shape
    if k == 0:
        point = red.x.copy()
        return _finish(lp, point, red.const, red.const, 0, None)

    tab = _Tableau(red.c, red.A, red.b, red.lo, red.hi, basis=basis)
    max_iter = 50 * (m + k) + 5000
    if tab.k:
        cost1 = np.zeros(k + m + tab.k)
        cost1[k + m:] = 1.0
        status = tab.run(cost1, max_iter)
        if status is not LpStatus.OPTIMAL:
            return LpOutcome(LpStatus.NUMERICAL, iterations=tab.iterations)
        tab.refactor()
        infeas = tab.x[k + m:].sum()
        if infeas > EPS_FEAS * max(1.0, np.abs(red.b).max(initial=0.0)):
            y = tab.row_duals(cost1)
            rows = tuple(int(red.rows[i]) for i in np.flatnonzero(np.abs(y) > 1e-9))
            return LpOutcome(LpStatus.INFEASIBLE, iterations=tab.iterations, conflict_rows=rows)
        tab.hi[k + m:] = 0.0
        tab.x[k + m:] = np.minimum(tab.x[k + m:], 0.0)
    cost2 = np.zeros(k + m + tab.k)
    cost2[:k] = red.c
    status = tab.run(cost2, max_iter)
    if status is LpStatus.UNBOUNDED:
        return LpOutcome(LpStatus.UNBOUNDED, iterations=tab.iterations)
    if status is not LpStatus.OPTIMAL:
        return LpOutcome(LpStatus.NUMERICAL, iterations=tab.iterations)
    tab.refactor()
    xr = np.clip(tab.x[:k], red.lo, red.hi)
    mu = np.maximum(-tab.row_duals(cost2), 0.0)
    dual = _dual_bound(red.c, red.A, red.b, red.lo, red.hi, mu) + red.const
    point = red.x.copy()
    point[red.cols] = xr
    primal = float(red.c @ xr) + red.const
    return _finish(lp, point, primal, dual, tab.iterations, tab.basis.copy())


def _finish(lp: LinearProgram, point, primal, dual, iterations, basis) -> LpOutcome:
    lo, hi = lp.effective_bounds()
    point = np.clip(point, lo, hi)
    slack = lp.rhs - lp.matrix @ point
    scale = np.maximum(1.0, np.abs(lp.rhs))
    if np.any(slack < -EPS_FEAS * scale):
        log.warning("simplex point violates rows by %g", -slack.min())
        return LpOutcome(LpStatus.NUMERICAL, iterations=iterations)
    value = lp.value_at(point)
    gap = value - dual
    if gap > 1e-6 * max(1.0, abs(value)) or gap < -1e-6 * max(1.0, abs(value)):
        log.warning("weak duality audit failed: primal %g dual %g", value, dual)
        return LpOutcome(LpStatus.NUMERICAL, iterations=iterations)
    return LpOutcome(LpStatus.OPTIMAL, value=value, point=point, dual_bound=dual,
                     iterations=iterations, basis=basis)


# ---------------------------------------------------------------------------
# text dump


def _lp_num(v: float) -> str:
    return f"{v + 0.0:.12g}"


def _lp_expr(coeffs, names) -> str:
    parts = []
    for j, a in coeffs:
        if a == 0:
            continue
        sign = "-" if a < 0 else "+"
        mag = abs(a)
        term = names[j] if mag == 1 else f"{_lp_num(mag)} {names[j]}"
        parts.append(f"{sign} {term}")
    if not parts:
        return "0"
    text = " ".join(parts)
    return text[2:] if text.startswith("+ ") else "-" + text[1:]


def write_lp(lp: LinearProgram, title: str = "") -> str:
    """Render ``lp`` in the CPLEX LP text format."""
    names = list(lp.names) if lp.names is not None else [f"x{j + 1}" for j in range(lp.num_vars)]
    lo, hi = lp.effective_bounds()
    out = []
    if title:
        out.append(f"\\ {title}")
    obj = _lp_expr(enumerate(lp.objective), names)
    if lp.offset:
        obj += f" {'-' if lp.offset < 0 else '+'} {_lp_num(abs(lp.offset))}"
    out += ["Minimize", f" obj: {obj}", "Subject To"]
    for i in range(lp.num_rows):
        out.append(f" r{i + 1}: {_lp_expr(enumerate(lp.matrix[i]), names)} <= {_lp_num(lp.rhs[i])}")
    out.append("Bounds")
    for j in range(lp.num_vars):
        if lo[j] == hi[j]:
            out.append(f" {names[j]} = {_lp_num(lo[j])}")
        else:
            out.append(f" {_lp_num(lo[j])} <= {names[j]} <= {_lp_num(hi[j])}")
    out.append("End")
    return "\n".join(out) + "\n"
