"""Two-phase alpha-beta search for 0/1 QIPs with relaxation-driven pruning.

The feasibility phase runs a null-window search on {win, loss}; the
optimization phase runs fail-soft alpha-beta on exact rational payoffs.  At
every optimization node a relaxation supplies a lower bound: the plain LP,
the LP with a heuristically built scenario, or (while the first block is still
open) the deterministic equivalent over a scenario set plus that scenario.

Row reasoning on the existential constraints detects lost nodes early, fixes
forced existential moves inside the current block and backjumps over levels
that did not contribute to a violated row.
"""

from __future__ import annotations

import enum
import math
import time
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Sequence

import numpy as np

from . import heur
from .model import FORALL, Partial, QipInstance
from .lp import LinearProgram
from .relax import RelaxationOutcome, ScenarioSet, solve_merged, solve_relaxation_lp

INF = math.inf

PLAIN = "plain"
FIXED = "fixed"
S_RELAX = "s"
RELAX_MODES = (PLAIN, FIXED, S_RELAX)

FEASIBILITY = "feasibility"
OPTIMIZATION = "optimization"

# slack subtracted from float relaxation values before rounding up to the
# objective's rational grid
BOUND_TOL = 1e-6


@dataclass(frozen=True)
class SearchConfig:
    sbar: int = 0
    relaxation_mode: str = FIXED
    scenario_mode: str = heur.HEURISTIC
    restart_first: int = 100
    restart_factor: float = 1.5
    node_limit: int | None = None
    time_limit: float | None = None
    seed: int = 0
    pruning: bool = True

    def __post_init__(self):
        if self.sbar < 0:
            raise ValueError("sbar must be nonnegative")
        if self.relaxation_mode not in RELAX_MODES:
            raise ValueError(f"relaxation_mode must be one of {RELAX_MODES}")
        if self.scenario_mode not in (heur.HEURISTIC, heur.RANDOM):
            raise ValueError("scenario_mode must be 'heuristic' or 'random'")


class SearchStatus(enum.Enum):
    FEASIBLE = "feasible"
    INFEASIBLE = "infeasible"
    LIMIT = "limit"


@dataclass
class SearchStats:
    decision_nodes: int = 0
    feasibility_nodes: int = 0
    conflicts: int = 0
    restarts: int = 0
    relaxation_calls: int = 0
    relaxation_prunes: int = 0
    lp_iterations: int = 0
    wall_time: float = field(default=0.0, compare=False, repr=False)


@dataclass(frozen=True)
class _Relaxed:
    outcome: RelaxationOutcome
    scenario: tuple[int, ...] | None
    dep: bool


@dataclass(frozen=True)
class SearchResult:
    status: SearchStatus
    value: Fraction | None
    principal_variation: tuple[int, ...] | None
    first_stage: tuple[int, ...] | None
    stats: SearchStats
    lower_bound: Fraction | float | None = None
    upper_bound: Fraction | float | None = None


class _Restart(Exception):
    pass


class _Limit(Exception):
    pass


class Searcher:
    """Holds the state of one search; not thread safe."""

    def __init__(self, inst: QipInstance, config: SearchConfig = SearchConfig(),
                 trace: Callable[[str], None] | None = None):
        if not inst.is_binary:
            raise ValueError("the search handles 0/1 instances only")
        self.inst = inst
        self.cfg = config
        self.trace = trace
        self.arr = inst.arrays
        self.n = inst.num_vars
        self.rng = np.random.default_rng(config.seed)
        self.heur = heur.HeuristicState(self.n)
        self.stats = SearchStats()
        self.scenarios = ScenarioSet((), config.sbar)
        self.phase = OPTIMIZATION
        self.blocks = inst.blocks
        self.block_vars = [np.arange(b.start, b.stop) for b in self.blocks]
        self.univ_block = [b.quantifier == FORALL for b in self.blocks]
        self.is_univ = self.arr.is_universal
        self.uvars = np.array(inst.universal_vars, dtype=np.int64)
        self.block_of = inst.block_of
        self.system = inst.universal_system
        self.restart_threshold = float(config.restart_first)
        self.conflicts_since_restart = 0
        self.start_time = 0.0
        self.best_root: Fraction | float = INF
        self.root_bound: Fraction | float = -INF
        self._reset()

    # ------------------------------------------------------------------ state

    def _reset(self):
        self.lo = self.arr.lower.copy()
        self.hi = self.arr.upper.copy()
        self.assigned = np.zeros(self.n, dtype=bool)
        self.level = np.full(self.n, -1, dtype=np.int64)
        self.trail: list[int] = []

    def _assign(self, j: int, v: int, level: int):
        self.lo[j] = self.hi[j] = v
        self.assigned[j] = True
        self.level[j] = level
        self.trail.append(j)

    def _undo(self, mark: int):
        while len(self.trail) > mark:
            j = self.trail.pop()
            self.lo[j] = self.arr.lower[j]
            self.hi[j] = self.arr.upper[j]
            self.assigned[j] = False
            self.level[j] = -1

    def partial(self) -> list:
        return [int(self.lo[j]) if self.assigned[j] else None for j in range(self.n)]

    def load_partial(self, partial: Partial):
        """Replace the current node by ``partial`` (all entries at level 0)."""
        self._reset()
        for j, v in enumerate(partial):
            if v is not None:
                self._assign(j, int(v), 0)

    def _current_block(self) -> int:
        j = int(np.argmin(self.assigned))
        if self.assigned[j]:
            return len(self.blocks)
        return self.block_of[j]

    def _universal_assignment(self) -> list[tuple[int, int]]:
        return [(int(j), int(self.lo[j])) for j in self.uvars if self.assigned[j]]

    def _ufixed(self) -> dict[int, int]:
        return {int(j): int(self.lo[j]) for j in self.uvars if self.assigned[j]}

    # -------------------------------------------------------------- reasoning

    def _slack(self) -> np.ndarray:
        return self.arr.b_int - self.arr.min_activity(self.lo, self.hi)

    def _row_reason(self, i: int, skip: int = -1) -> tuple[int, list[tuple[int, int]]]:
        """Highest level among assigned variables pushing row ``i`` above its minimum."""
        a = self.arr.A_int[i]
        contrib = self.assigned & (((a > 0) & (self.lo > self.arr.lower)) | ((a < 0) & (self.hi < self.arr.upper)))
        if skip >= 0:
            contrib[skip] = False
        idx = np.flatnonzero(contrib)
        lits = [(int(j), int(self.lo[j])) for j in idx]
        return (int(self.level[idx].max()) if idx.size else 0), lits

    def _conflict(self, literals: Sequence[tuple[int, int]]):
        self.stats.conflicts += 1
        heur.on_conflict(self.heur, self._universal_assignment(), literals)
        if self.phase == OPTIMIZATION:
            self.conflicts_since_restart += 1
            if self.conflicts_since_restart >= self.restart_threshold:
                raise _Restart()

    def _propagate(self, level: int):
        """Returns ``None`` or the level the detected loss depends on."""
        while True:
            slack = self._slack()
            bad = np.flatnonzero(slack < 0)
            if bad.size:
                lvl, lits = self._row_reason(int(bad[0]))
                self._conflict(lits)
                return min(lvl, level)
            cb = self._current_block()
            if cb == len(self.blocks):
                return None
            cols = self.block_vars[cb][~self.assigned[self.block_vars[cb]]]
            A = self.arr.A_int[:, cols]
            no1 = A > slack[:, None]
            no0 = -A > slack[:, None]
            imp1 = no1.any(axis=0)
            imp0 = no0.any(axis=0)
            if self.univ_block[cb]:
                changed = False
                ust = self.system.state(self._ufixed())
                for k, j in enumerate(cols):
                    j = int(j)
                    legal = [v for v in (0, 1) if self.system.allows(ust, j, v)]
                    for v in legal:
                        if (imp1 if v else imp0)[k]:
                            i = int(np.flatnonzero((no1 if v else no0)[:, k])[0])
                            _, lits = self._row_reason(i)
                            self._conflict(lits + [(j, v)])
                            return level
                    if len(legal) == 1:
                        self._assign(j, legal[0], level)
                        ust = self.system.extend(ust, j, legal[0])
                        changed = True
                if not changed:
                    return None
                continue
            both = imp1 & imp0
            if both.any():
                k = int(np.flatnonzero(both)[0])
                j = int(cols[k])
                l1, lits1 = self._row_reason(int(np.flatnonzero(no1[:, k])[0]), skip=j)
                l0, lits0 = self._row_reason(int(np.flatnonzero(no0[:, k])[0]), skip=j)
                self._conflict(lits1 + lits0)
                return min(max(l1, l0), level)
            forced = imp1 | imp0
            if not forced.any():
                return None
            for k in np.flatnonzero(forced):
                self._assign(int(cols[k]), 0 if imp1[k] else 1, level)

    def _record_visits(self, from_block: int, to_block: int):
        for b in range(from_block, to_block):
            if self.univ_block[b]:
                upto = self.blocks[b].stop
                prefix = [int(self.lo[j]) for j in self.uvars if j < upto]
                heur.record_visit(self.heur, prefix)

    # ------------------------------------------------------------ relaxations

    def _scenario(self) -> tuple[int, ...]:
        # the scenario mode only governs how the scenario set is rebuilt
        return heur.build_scenario(self.inst, self.heur, self.partial(), self.rng, heur.HEURISTIC)

    def relax_bound_at_node(self, inherited: "_Relaxed | None" = None) -> "_Relaxed":
        """Relaxation of the current node.

        ``inherited`` is the parent's relaxation; when its LP optimum already
        satisfies every fixing made since, it is optimal here too and is reused.
        """
        self.stats.relaxation_calls += 1
        mode = self.cfg.relaxation_mode
        scen = None if mode == PLAIN else self._scenario()
        dep = mode == S_RELAX and len(self.scenarios) > 0 and self._current_block() == 0
        if inherited is not None and not dep and not inherited.dep and inherited.scenario == scen:
            x = inherited.outcome.node_assignment
            if x is not None:
                fixed = np.flatnonzero(self.assigned)
                if np.all(np.abs(x[fixed] - self.lo[fixed]) <= 1e-9):
                    return inherited
        if dep:
            out = solve_merged(self.inst, self.scenarios, scen, self.partial())
        else:
            lo = self.lo.astype(float)
            hi = self.hi.astype(float)
            if scen is not None:
                lo[self.uvars] = hi[self.uvars] = scen
            lp = LinearProgram(self.arr.c, self.arr.A, self.arr.b, lo, hi)
            out = solve_relaxation_lp(self.inst, lp)
        if out.lp is not None:
            self.stats.lp_iterations += out.lp.iterations
        return _Relaxed(out, scen, dep)

    def _rational_bound(self, value: float) -> Fraction:
        d = self.arr.obj_scale
        return Fraction(math.ceil((value - BOUND_TOL * max(1.0, abs(value))) * d), d)

    # ------------------------------------------------------------------ search

    def _tick(self):
        st = self.stats
        if self.phase == OPTIMIZATION:
            st.decision_nodes += 1
        else:
            st.feasibility_nodes += 1
        total = st.decision_nodes + st.feasibility_nodes
        if self.cfg.node_limit is not None and total > self.cfg.node_limit:
            raise _Limit()
        if self.cfg.time_limit is not None and total % 64 == 0:
            if time.perf_counter() - self.start_time > self.cfg.time_limit:
                raise _Limit()

    def _leaf_value(self):
        if self.phase == FEASIBILITY:
            return 0
        return self.arr.objective_value(self.lo)

    def _node(self, level: int, alpha, beta, parent_block: int, inherited: _Relaxed | None = None):
        """Fail-soft alpha-beta; returns ``(value, jump_level, play)``."""
        mark = len(self.trail)
        try:
            jump = self._propagate(level)
            if jump is not None:
                return INF, jump, None
            cb = self._current_block()
            self._record_visits(parent_block, cb)
            if cb == len(self.blocks):
                return self._leaf_value(), level, self.lo.copy()
            self._tick()

            rel = None
            if self.phase == OPTIMIZATION:
                rel = self.relax_bound_at_node(inherited)
                out = rel.outcome
                if out.infeasible:
                    lits = []
                    if not rel.dep:
                        for i in out.lp.conflict_rows:
                            lits += self._row_reason(i)[1]
                    self._conflict(lits)
                    if self.cfg.pruning:
                        self.stats.relaxation_prunes += 1
                        return INF, level, None
                    rel = None
                else:
                    bound = self._rational_bound(out.safe_bound)
                    if level == 0:
                        self.root_bound = max(self.root_bound, bound)
                    if self.cfg.pruning and bound >= beta:
                        self.stats.relaxation_prunes += 1
                        return bound, level, None
            return self._branch(level, alpha, beta, cb, rel)
        finally:
            self._undo(mark)

    def _branch(self, level, alpha, beta, cb, rel: _Relaxed | None):
        cols = self.block_vars[cb][~self.assigned[self.block_vars[cb]]]
        act = self.heur.vsids[cols].sum(axis=1)
        j = int(cols[int(np.argmax(act))])
        universal = self.univ_block[cb]
        hint = None if rel is None else rel.outcome
        if universal:
            if rel is not None and rel.scenario is not None:
                first = rel.scenario[int(np.searchsorted(self.uvars, j))]
            else:
                first = self.heur.preferred_value(j)
            ust = self.system.state(self._ufixed())
            order = [v for v in (first, 1 - first) if self.system.allows(ust, j, v)]
            best = -INF
        else:
            first = 0
            if hint is not None:
                if hint.node_assignment is not None:
                    first = int(hint.node_assignment[j] > 0.5)
                elif cb == 0 and hint.first_stage is not None:
                    first = int(hint.first_stage[j - self.blocks[0].start] > 0.5)
            order = [first, 1 - first]
            best = INF
        best_play = None
        for v in order:
            mark = len(self.trail)
            self._assign(j, v, level + 1)
            if universal:
                val, jump, play = self._node(level + 1, max(alpha, best), beta, cb, rel)
            else:
                val, jump, play = self._node(level + 1, alpha, min(beta, best), cb, rel)
            self._undo(mark)
            if val == INF and jump <= level:
                return INF, jump, None
            if universal:
                if val > best:
                    best, best_play = val, play
                if best >= beta:
                    break
            else:
                if val < best:
                    best, best_play = val, play
                if best <= alpha:
                    break
            if level == 0 and self.phase == OPTIMIZATION and not universal:
                self.best_root = min(self.best_root, best)
        return best, level, best_play

    # ------------------------------------------------------------------ driver

    def on_restart(self):
        """Rebuild the scenario set from the gathered statistics and start over at the root."""
        self.stats.restarts += 1
        self.restart_threshold *= self.cfg.restart_factor
        self.conflicts_since_restart = 0
        self._rebuild()
        self._reset()
        if self.trace:
            self.trace(f"restart {self.stats.restarts}, conflicts {self.stats.conflicts}, |S| {len(self.scenarios)}")

    def _rebuild(self):
        if self.cfg.relaxation_mode == S_RELAX and self.cfg.sbar > 0:
            self.scenarios = heur.rebuild_scenario_set(self.inst, self.heur, self.cfg.sbar, self.rng,
                                                       self.cfg.scenario_mode)
        else:
            self.scenarios = ScenarioSet((), self.cfg.sbar)

    def alphabeta(self, partial: Partial, alpha, beta, phase: str = OPTIMIZATION):
        """Value of the subgame at ``partial`` clamped to ``[alpha, beta]``."""
        self.phase = phase
        self.load_partial(partial)
        cb = self._current_block()
        val, _, _ = self._node(0, alpha, beta, cb)
        self._reset()
        if val == INF:
            return INF if beta == INF else beta
        return max(alpha, min(val, beta))

    def solve(self) -> SearchResult:
        self.start_time = time.perf_counter()
        try:
            result = self._solve()
        except _Limit:
            result = SearchResult(SearchStatus.LIMIT, None, None, None, self.stats,
                                  None if self.root_bound == -INF else self.root_bound,
                                  None if self.best_root == INF else self.best_root)
        self.stats.wall_time = time.perf_counter() - self.start_time
        return result

    def _solve(self) -> SearchResult:
        self.phase = FEASIBILITY
        self._reset()
        val, _, _ = self._node(0, 0, INF, 0)
        if val == INF:
            return SearchResult(SearchStatus.INFEASIBLE, None, None, None, self.stats)

        self.phase = OPTIMIZATION
        self._rebuild()
        while True:
            self._reset()
            try:
                val, _, play = self._node(0, -INF, INF, 0)
                break
            except _Restart:
                self.on_restart()
        self._reset()
        if val == INF:
            return SearchResult(SearchStatus.INFEASIBLE, None, None, None, self.stats)
        pv = tuple(int(v) for v in play)
        first = self.blocks[0]
        return SearchResult(SearchStatus.FEASIBLE, Fraction(val), pv, pv[first.start:first.stop], self.stats,
                            Fraction(val), Fraction(val))


def solve(inst: QipInstance, config: SearchConfig = SearchConfig(),
          trace: Callable[[str], None] | None = None) -> SearchResult:
    """Optimal value and principal variation of a 0/1 QIP."""
    return Searcher(inst, config, trace).solve()


def relative_difference(n_sbar: int, n_zero: int) -> float:
    """Signed relative node-count change ``(N_S - N_0) / max(N_S, N_0)``."""
    if n_sbar < 1 or n_zero < 1:
        raise ValueError("node counts must be positive")
    return (n_sbar - n_zero) / max(n_sbar, n_zero)
