"""Search statistics that guide scenario construction.

``HeuristicState`` collects three kinds of information about the universal
player: VSIDS activity per literal, the killer (sub)scenario of the most recent
conflict, and how often each universal prefix was visited.
"""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .model import FORALL, Partial, QipInstance
from .relax import Scenario, ScenarioSet, dedupe

HEURISTIC = "heuristic"
RANDOM = "random"


@dataclass
class HeuristicState:
    num_vars: int
    decay_constant: float = 2.0
    decay_period: int = 256
    vsids: np.ndarray = field(default=None)
    killer: list = field(default=None)
    freq: Counter = field(default_factory=Counter)
    conflicts: int = 0

    def __post_init__(self):
        if self.decay_constant <= 1:
            raise ValueError("decay_constant must exceed 1")
        if self.vsids is None:
            self.vsids = np.zeros((self.num_vars, 2))
        if self.killer is None:
            self.killer = [None] * self.num_vars

    def copy(self) -> "HeuristicState":
        return HeuristicState(self.num_vars, self.decay_constant, self.decay_period,
                              self.vsids.copy(), list(self.killer), Counter(self.freq), self.conflicts)

    def count(self, prefix: Sequence[int]) -> int:
        return self.freq.get(tuple(prefix), 0)

    def top(self, k: int) -> list[tuple[Scenario, int]]:
        """The ``k`` most visited prefixes: by count, then longer first, then lexicographic."""
        ranked = sorted(self.freq.items(), key=lambda kv: (-kv[1], -len(kv[0]), kv[0]))
        return ranked[:k]

    def preferred_value(self, j: int) -> int:
        if self.killer[j] is not None:
            return self.killer[j]
        # ties go to polarity 0
        return int(self.vsids[j, 1] > self.vsids[j, 0])


def on_conflict(state: HeuristicState, universal_assignment: Iterable[tuple[int, int]],
                conflict_literals: Iterable[tuple[int, int]]) -> HeuristicState:
    """Bump VSIDS for the conflict literals and overwrite the killer entries.

    ``universal_assignment`` lists ``(var, value)`` for the assigned universal
    variables at conflict time.  Every ``decay_period`` conflicts all counters
    are divided by ``decay_constant``.
    """
    for j, p in conflict_literals:
        state.vsids[j, 1 if p else 0] += 1.0
    for j, v in universal_assignment:
        state.killer[j] = int(v)
    state.conflicts += 1
    if state.conflicts % state.decay_period == 0:
        decay(state)
    return state


def decay(state: HeuristicState) -> HeuristicState:
    state.vsids /= state.decay_constant
    return state


def record_visit(state: HeuristicState, subscenario: Sequence[int]) -> HeuristicState:
    """Count a visit of ``subscenario`` and of each of its shorter prefixes."""
    s = tuple(int(v) for v in subscenario)
    for k in range(1, len(s) + 1):
        state.freq[s[:k]] += 1
    return state


def build_scenario(inst: QipInstance, state: HeuristicState, partial: Partial, rng: np.random.Generator,
                   mode: str = HEURISTIC) -> Scenario:
    """Complete the universal part of ``partial`` to a scenario.

    Block by block, unassigned universal variables are visited in random
    order; each takes its killer value if one is stored, otherwise its larger
    VSIDS polarity (``mode="random"``: a coin flip).  Values that would make the
    universal system unsatisfiable are flipped.
    """
    system = inst.universal_system
    fixed = {j: int(partial[j]) for j in inst.universal_vars if partial[j] is not None}
    if not system.extendible(fixed):
        raise ValueError("partial universal assignment cannot be extended")
    st = system.state(fixed)
    for block in inst.blocks:
        if block.quantifier != FORALL:
            continue
        free = [j for j in block if j not in fixed]
        if not free:
            continue
        for idx in rng.permutation(len(free)):
            j = free[idx]
            if mode == RANDOM:
                value = int(rng.integers(inst.lower[j], inst.upper[j] + 1))
            else:
                value = state.preferred_value(j)
            if not system.allows(st, j, value):
                value = 1 - value
                if not system.allows(st, j, value):
                    value = _first_legal(inst, st, j)
            fixed[j] = value
            st = system.extend(st, j, value)
    return tuple(fixed[j] for j in inst.universal_vars)


def _first_legal(inst: QipInstance, st, j: int) -> int:
    for v in range(inst.lower[j], inst.upper[j] + 1):
        if inst.universal_system.allows(st, j, v):
            return v
    raise AssertionError("no legal value for a universal variable of an extendible prefix")


def _partial_from_prefix(inst: QipInstance, prefix: Sequence[int]) -> list:
    partial: list = [None] * inst.num_vars
    for k, v in enumerate(prefix):
        partial[inst.universal_vars[k]] = int(v)
    return partial


def rebuild_scenario_set(inst: QipInstance, state: HeuristicState, sbar: int, rng: np.random.Generator,
                         mode: str = HEURISTIC) -> ScenarioSet:
    """Scenario set from the ``sbar`` most visited (sub)scenarios, each completed
    by :func:`build_scenario`.  ``mode="random"`` draws ``sbar`` random scenarios."""
    if sbar < 0:
        raise ValueError("sbar must be nonnegative")
    out = []
    if mode == RANDOM:
        for _ in range(sbar):
            out.append(build_scenario(inst, state, [None] * inst.num_vars, rng, RANDOM))
    else:
        for prefix, _ in state.top(sbar):
            out.append(build_scenario(inst, state, _partial_from_prefix(inst, prefix), rng))
    return ScenarioSet(dedupe(out), sbar)
