"""Seeded generators for the multistage selection, assignment and runway families.

All three families alternate an existential planning block with T pairs of
(universal disclosure, existential reaction) blocks.  Revealed costs multiply a
decision by a scenario indicator; the product is represented by a binary
``z <= y`` variable so that every instance stays 0/1.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .model import EXISTS, FORALL, QipInstance, write_instance


@dataclass(frozen=True)
class SelectionParams:
    n: int
    p: int | None = None
    N: int = 2
    T: int = 1
    initial_cost: tuple[int, int] = (1, 10)
    scenario_cost: tuple[int, int] = (1, 10)
    seed: int = 0

    def __post_init__(self):
        p = self.n // 2 if self.p is None else self.p
        object.__setattr__(self, "p", max(p, 1))
        if not 1 <= self.p <= self.n:
            raise ValueError("need 1 <= p <= n")
        if self.N < 1 or self.T < 1:
            raise ValueError("need N >= 1 and T >= 1")


@dataclass(frozen=True)
class AssignmentParams:
    n: int
    N: int = 2
    T: int = 1
    initial_cost: tuple[int, int] = (1, 10)
    scenario_cost: tuple[int, int] = (1, 10)
    seed: int = 0

    def __post_init__(self):
        if self.n < 1 or self.N < 1 or self.T < 1:
            raise ValueError("need n, N, T >= 1")


@dataclass(frozen=True)
class RunwayParams:
    A: int
    S: int
    b: int = 3
    T: int = 1
    move_cost: tuple[int, int] = (1, 3)
    max_window: int = 5
    seed: int = 0

    def __post_init__(self):
        if self.A < 1 or self.S < 1 or self.b < 1 or self.T < 1:
            raise ValueError("need A, S, b, T >= 1")
        if self.A > self.b * self.S:
            raise ValueError("more airplanes than runway slots (A > b*S)")
        if self.T > self.A:
            raise ValueError("more disclosure periods than airplanes (T > A)")

    @property
    def min_window(self) -> int:
        return math.ceil(self.A / self.b)


class _Builder:
    def __init__(self):
        self.blocks: list[tuple[str, int]] = []
        self.n = 0
        self.obj: dict[int, int] = {}
        self.exist: list[tuple[dict, int]] = []
        self.univ: list[tuple[dict, int]] = []

    def block(self, quantifier: str, size: int) -> list[int]:
        idx = list(range(self.n, self.n + size))
        self.blocks.append((quantifier, size))
        self.n += size
        return idx

    def equal(self, rows: list, coeffs: dict, rhs: int):
        rows.append((coeffs, rhs))
        rows.append(({j: -a for j, a in coeffs.items()}, -rhs))

    def one_hot(self, ys: list[int]):
        self.equal(self.univ, {y: 1 for y in ys}, 1)

    def finish(self) -> QipInstance:
        if self.blocks[-1][0] != EXISTS:
            self.blocks.append((EXISTS, 0))
        return QipInstance.build(self.blocks, self.obj, self.exist, self.univ)


def _costs(rng: np.random.Generator, rng_range: tuple[int, int], size) -> np.ndarray:
    lo, hi = rng_range
    return rng.integers(lo, hi + 1, size=size)


def _revealed_stages(bld: _Builder, items: int, N: int, T: int, costs: np.ndarray):
    """Append T (disclosure, reaction) block pairs; returns z[t][s][i] indices."""
    z_all = []
    for t in range(T):
        ys = bld.block(FORALL, N)
        bld.one_hot(ys)
        zs = bld.block(EXISTS, N * items)
        z = [[zs[s * items + i] for i in range(items)] for s in range(N)]
        for s in range(N):
            for i in range(items):
                bld.exist.append(({z[s][i]: 1, ys[s]: -1}, 0))
                bld.obj[z[s][i]] = int(costs[t, s, i])
        z_all.append(z)
    return z_all


def gen_selection(params: SelectionParams) -> QipInstance:
    """Pick ``p`` of ``n`` items over an initial stage and ``T`` revealed-cost stages."""
    rng = np.random.default_rng(params.seed)
    n, N, T = params.n, params.N, params.T
    c0 = _costs(rng, params.initial_cost, n)
    cs = _costs(rng, params.scenario_cost, (T, N, n))
    bld = _Builder()
    x0 = bld.block(EXISTS, n)
    for i in range(n):
        bld.obj[x0[i]] = int(c0[i])
    z = _revealed_stages(bld, n, N, T, cs)
    every = list(x0)
    for i in range(n):
        row = {x0[i]: 1}
        for t in range(T):
            for s in range(N):
                row[z[t][s][i]] = 1
                every.append(z[t][s][i])
        bld.exist.append((row, 1))
    bld.equal(bld.exist, {j: 1 for j in every}, params.p)
    return bld.finish()


def gen_assignment(params: AssignmentParams) -> QipInstance:
    """Perfect matching of ``K_{n,n}`` built over an initial stage and ``T`` revealed-cost stages."""
    rng = np.random.default_rng(params.seed)
    n, N, T = params.n, params.N, params.T
    E = n * n
    c0 = _costs(rng, params.initial_cost, E)
    cs = _costs(rng, params.scenario_cost, (T, N, E))
    bld = _Builder()
    x0 = bld.block(EXISTS, E)
    for e in range(E):
        bld.obj[x0[e]] = int(c0[e])
    z = _revealed_stages(bld, E, N, T, cs)

    def edge_vars(e):
        return [x0[e]] + [z[t][s][e] for t in range(T) for s in range(N)]

    for a in range(n):
        bld.equal(bld.exist, {j: 1 for bb in range(n) for j in edge_vars(a * n + bb)}, 1)
    for bb in range(n):
        bld.equal(bld.exist, {j: 1 for a in range(n) for j in edge_vars(a * n + bb)}, 1)
    return bld.finish()


def runway_windows(params: RunwayParams) -> list[tuple[int, int]]:
    """Candidate landing windows as (first slot, length), 0-based."""
    lo = params.min_window
    hi = max(lo, min(params.S, params.max_window))
    return [(st, ln) for ln in range(lo, hi + 1) for st in range(params.S - ln + 1)]


def runway_groups(params: RunwayParams) -> list[list[int]]:
    return [[a for a in range(params.A) if a % params.T == g] for g in range(params.T)]


def gen_runway(params: RunwayParams) -> QipInstance:
    """Initial landing schedule, then per group a disclosed window and a forced re-plan.

    Moving airplane ``a`` by ``d`` slots costs ``weight[a] * d``; the deviation is
    counted by ``S - 1`` ordered unit binaries per airplane.
    """
    rng = np.random.default_rng(params.seed)
    A, S, cap = params.A, params.S, params.b
    weight = _costs(rng, params.move_cost, A)
    windows = runway_windows(params)
    bld = _Builder()
    x0 = bld.block(EXISTS, A * S)
    plan = [[x0[a * S + j] for j in range(S)] for a in range(A)]
    for a in range(A):
        bld.equal(bld.exist, {plan[a][j]: 1 for j in range(S)}, 1)
    for j in range(S):
        bld.exist.append(({plan[a][j]: 1 for a in range(A)}, cap))

    final: dict[int, list[int]] = {}
    budget: dict[int, int] = {}
    for group in runway_groups(params):
        wvars = bld.block(FORALL, len(group) * len(windows))
        react = bld.block(EXISTS, len(group) * (S + S - 1))
        for g, a in enumerate(group):
            w = wvars[g * len(windows):(g + 1) * len(windows)]
            bld.one_hot(w)
            for k, (_, ln) in enumerate(windows):
                budget[w[k]] = ln
            base = g * (2 * S - 1)
            f = react[base:base + S]
            dev = react[base + S:base + 2 * S - 1]
            final[a] = f
            bld.equal(bld.exist, {f[j]: 1 for j in range(S)}, 1)
            for j in range(S):
                row = {f[j]: 1}
                for k, (st, ln) in enumerate(windows):
                    if st <= j < st + ln:
                        row[w[k]] = -1
                bld.exist.append((row, 0))
            shift = {f[j]: j for j in range(1, S)}
            for j in range(1, S):
                shift[plan[a][j]] = -j
            back = {v: -c for v, c in shift.items()}
            for d in dev:
                shift[d] = -1
                back[d] = -1
                bld.obj[d] = int(weight[a])
            bld.exist.append((shift, 0))
            bld.exist.append((back, 0))
            # the unit deviation binaries are interchangeable; fill them in order
            for k in range(len(dev) - 1):
                bld.exist.append(({dev[k + 1]: 1, dev[k]: -1}, 0))
    for j in range(S):
        bld.exist.append(({final[a][j]: 1 for a in range(A)}, cap))
    bld.univ.append((budget, 3 * A))
    return bld.finish()


FAMILIES = {
    "selection": (SelectionParams, gen_selection),
    "assignment": (AssignmentParams, gen_assignment),
    "runway": (RunwayParams, gen_runway),
}


def generate(family: str, **params) -> QipInstance:
    cls, gen = FAMILIES[family]
    return gen(cls(**params))


# Named benchmark grids; the last entry is the number of seeds per cell.
GRIDS = {
    "fixed": [
        ("selection", {"n": [10], "N": [4], "T": list(range(1, 8))}, 50),
        ("assignment", {"n": [4, 5, 6], "N": [2, 4, 8], "T": [1, 2, 3]}, 50),
        ("runway", {"A": [4, 5, 6], "b": [3], "S": list(range(5, 11)), "T": [1, 2, 3]}, 5),
    ],
    "srelax": [
        ("selection", {"n": [10, 20, 30], "N": [4], "T": list(range(1, 8))}, 50),
        ("assignment", {"n": [7], "N": [2, 4, 8], "T": [1, 2, 3]}, 50),
        ("runway", {"A": [4, 5, 6, 7], "b": [3], "S": list(range(5, 11)), "T": [1, 2, 3]}, 5),
    ],
}


@dataclass
class GridEntry:
    id: str
    family: str
    params: dict = field(default_factory=dict)
    path: str = ""


def grid_entries(name: str, seeds: int | None = None, master_seed: int = 0) -> list[GridEntry]:
    import itertools

    out = []
    for family, axes, per_cell in GRIDS[name]:
        keys = list(axes)
        for combo in itertools.product(*(axes[k] for k in keys)):
            base = dict(zip(keys, combo))
            if family == "runway" and base["T"] > base["A"]:
                continue
            for r in range(seeds if seeds is not None else per_cell):
                params = dict(base, seed=master_seed * 100003 + len(out))
                tag = "_".join(f"{k}{v}" for k, v in base.items())
                out.append(GridEntry(f"{family[:3]}_{tag}_r{r:02d}", family, params))
    return out


def write_grid(name: str, out_dir: str | Path, seeds: int | None = None, master_seed: int = 0) -> Path:
    """Write every instance of a named grid plus ``manifest.csv``; returns the manifest path."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    entries = grid_entries(name, seeds, master_seed)
    manifest = out / "manifest.csv"
    with manifest.open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["id", "family", "params", "path"])
        for e in entries:
            inst = generate(e.family, **e.params)
            e.path = f"{e.id}.qip"
            (out / e.path).write_text(f"# {e.family} {json.dumps(e.params, sort_keys=True)}\n" + write_instance(inst))
            w.writerow([e.id, e.family, json.dumps(e.params, sort_keys=True), e.path])
    return manifest


def params_dict(params) -> dict:
    return asdict(params)
