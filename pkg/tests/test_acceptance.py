"""Acceptance gate: one pass/fail line per criterion, printed even under capture."""

import statistics
import time

import numpy as np
import pytest

from oracles import vertex_lp
from qipsolver import heur
from qipsolver.heur import HeuristicState, build_scenario, record_visit
from qipsolver.instances import generate
from qipsolver.lp import LinearProgram, LpStatus, solve_lp
from qipsolver.model import Row, golden_game
from qipsolver.oracle import OracleStatus, enumerate_uncertainty_set, minimax_oracle
from qipsolver.relax import RelaxStatus, build_dep, fixed_scenario_lp, solve_dep, solve_relaxation_lp
from qipsolver.search import SearchConfig, SearchStatus, relative_difference, solve
from suite import MODE_GRID, small_instances

TOL = 1e-6


@pytest.fixture
def report(capsys):
    def emit(k, ok, detail):
        with capsys.disabled():
            print(f"\nCRITERION {k}: {'PASS' if ok else 'FAIL'} ({detail})")
        assert ok, detail
    return emit


@pytest.fixture(scope="module")
def suite():
    """Criterion-2 instances with their oracle verdicts, shared with criterion 7."""
    out = []
    for fam, p, inst in small_instances(200, seed=2024):
        res = minimax_oracle(inst, memo=True)
        out.append((fam, p, inst, res.value))
    return out


def test_criterion_1_golden_golden(report):
    t0 = time.perf_counter()
    inst = golden_game()
    problems = []
    o = minimax_oracle(inst)
    s = solve(inst, SearchConfig(relaxation_mode="s", sbar=2))
    for name, value, pv in (("oracle", o.value, o.principal_variation),
                            ("search", s.value, s.principal_variation)):
        if value != -1 or pv != (1, 1, 0, 0):
            problems.append(f"{name} gave {value} {pv}")
    for scen in ((1, 0), (1, 1)):
        out = solve_relaxation_lp(inst, fixed_scenario_lp(inst, scen))
        if abs(out.bound + 2) > TOL or abs(out.node_assignment[0] - 1) > TOL:
            problems.append(f"fixed {scen}: {out.bound}")
    lp, dmap = build_dep(inst, [(1, 0), (1, 1)])
    x = solve_lp(lp).point
    got = (x[dmap.index(0, ())], x[dmap.index(2, (1,))], x[dmap.k_index])
    if not np.allclose(got, (1, 0, -1), atol=TOL):
        problems.append(f"DEP {got}")
    elapsed = time.perf_counter() - t0
    if elapsed >= 1:
        problems.append(f"took {elapsed:.2f} s")
    report(1, not problems, "; ".join(problems) or f"exact match in {elapsed:.3f} s")


@pytest.mark.slow
def test_criterion_2_oracle_equivalence(report, suite):
    t0 = time.perf_counter()
    bad = []
    for k, (fam, p, inst, expected) in enumerate(suite):
        for mode, sbar in MODE_GRID:
            res = solve(inst, SearchConfig(relaxation_mode=mode, sbar=sbar, seed=k))
            verdict = res.status is SearchStatus.FEASIBLE
            if res.value != expected or verdict != (expected is not None):
                bad.append((k, fam, mode, sbar, res.value, expected))
    elapsed = time.perf_counter() - t0
    ok = not bad and elapsed < 600
    report(2, ok, f"{len(suite)} instances x {len(MODE_GRID)} modes, {len(bad)} mismatches, {elapsed:.0f} s"
           + (f", first {bad[0]}" if bad else ""))


def test_criterion_3_fixed_scenario_bound(report):
    rng = np.random.default_rng(3)
    checked, bad, feasible = 0, [], 0
    for fam, p, inst in small_instances(160, seed=303):
        if feasible == 100:
            break
        z = minimax_oracle(inst, memo=True).value
        if z is None:
            continue
        feasible += 1
        legal = enumerate_uncertainty_set(inst)
        for i in rng.integers(0, len(legal), 5):
            out = solve_relaxation_lp(inst, fixed_scenario_lp(inst, legal[i]))
            checked += 1
            if out.status is RelaxStatus.INFEASIBLE or out.bound > float(z) + TOL:
                bad.append((fam, p, legal[i], out.bound, z))

    # infeasible variants: one extra random existential row, plus rows no play can meet
    implied, infeasible_cases = 0, 0
    for k, (fam, p, inst) in enumerate(small_instances(60, seed=304)):
        n = inst.num_vars
        ev = [j for j in range(n) if not inst.arrays.is_universal[j]]
        if k % 3 == 0:
            extra = Row.make({int(rng.choice(ev)): -1}, -2)
        else:
            cols = rng.choice(n, size=min(n, 4), replace=False)
            extra = Row.make({int(j): int(rng.integers(-3, 4)) for j in cols}, int(rng.integers(-3, 2)))
        variant = inst.with_exist_rows(list(inst.exist_rows) + [extra])
        z = minimax_oracle(variant, memo=True)
        for scen in enumerate_uncertainty_set(variant)[:5]:
            out = solve_relaxation_lp(variant, fixed_scenario_lp(variant, scen))
            if out.status is RelaxStatus.INFEASIBLE:
                implied += 1
                if z.status is not OracleStatus.INFEASIBLE:
                    bad.append((fam, p, "infeasible relaxation, feasible game"))
        infeasible_cases += z.status is OracleStatus.INFEASIBLE
    ok = feasible == 100 and not bad and implied > 0
    report(3, ok, f"{feasible} feasible instances, {checked} bounds, {implied} infeasible relaxations over "
                  f"{infeasible_cases} infeasible games, {len(bad)} violations")


def test_criterion_4_dep_chain(report):
    rng = np.random.default_rng(4)
    used, steps, bad = 0, 0, []
    for fam, p, inst in small_instances(200, seed=404):
        if used == 50:
            break
        legal = enumerate_uncertainty_set(inst)
        if not 3 <= len(legal) <= 12:
            continue
        z = minimax_oracle(inst, memo=True).value
        used += 1
        order = [legal[i] for i in rng.permutation(len(legal))]
        prev = -np.inf
        for k in range(1, len(order) + 1):
            out = solve_dep(inst, order[:k])
            steps += 1
            v = np.inf if out.status is RelaxStatus.INFEASIBLE else out.bound
            if v < prev - TOL or (z is not None and v > float(z) + TOL):
                bad.append((fam, p, k, v, prev, z))
            if z is None and k == len(order) and v != np.inf:
                bad.append((fam, p, "full DEP feasible on infeasible game"))
            prev = v
    report(4, used == 50 and not bad, f"{used} chains, {steps} DEP solves, {len(bad)} violations")


@pytest.mark.slow
def test_criterion_5_node_count_trend(report):
    d = []
    for k in range(52):
        inst = generate("selection", n=10, N=4, T=1 + k % 4, seed=7000 + k)
        base = solve(inst, SearchConfig(relaxation_mode="s", sbar=0, seed=k))
        ours = solve(inst, SearchConfig(relaxation_mode="s", sbar=8, scenario_mode=heur.HEURISTIC, seed=k))
        assert base.value == ours.value
        d.append(relative_difference(max(ours.stats.decision_nodes, 1), max(base.stats.decision_nodes, 1)))
    med = statistics.median(d)
    report(5, len(d) >= 50 and med <= 0, f"{len(d)} instances, median D_r at sbar 8 = {med:+.3f}")


def test_criterion_6_scenario_machinery(report):
    rng = np.random.default_rng(6)
    calls, bad = 0, 0
    fams = {"selection": dict(n=3, N=3, T=2), "assignment": dict(n=2, N=3, T=2),
            "runway": dict(A=2, S=4, b=1, T=2)}
    per_instance = 10_000 // 60 + 1
    for k in range(60):
        fam = sorted(fams)[k % 3]
        inst = generate(fam, seed=600 + k, **fams[fam])
        legal = enumerate_uncertainty_set(inst)
        legal_set = set(legal)
        uv = inst.universal_vars
        state = HeuristicState(inst.num_vars)
        for _ in range(per_instance):
            if calls == 10_000:
                break
            j = int(rng.choice(uv))
            state.vsids[j, int(rng.integers(0, 2))] += float(rng.random())
            state.killer[j] = int(rng.integers(0, 2)) if rng.random() < 0.7 else None
            record_visit(state, legal[int(rng.integers(len(legal)))][: int(rng.integers(1, len(uv) + 1))])
            partial = [None] * inst.num_vars
            fixed = legal[int(rng.integers(len(legal)))]
            for jj, v in list(zip(uv, fixed))[: int(rng.integers(0, len(uv) + 1))]:
                partial[jj] = v
            mode = heur.HEURISTIC if rng.random() < 0.5 else heur.RANDOM
            seed = int(rng.integers(2 ** 31))
            a = build_scenario(inst, state, partial, np.random.default_rng(seed), mode)
            b = build_scenario(inst, state, partial, np.random.default_rng(seed), mode)
            calls += 1
            consistent = all(partial[jj] is None or partial[jj] == v for jj, v in zip(uv, a))
            if a not in legal_set or a != b or not consistent:
                bad += 1

    reps, diff = 0, 0
    for k in range(12):
        fam = sorted(fams)[k % 3]
        inst = generate(fam, seed=900 + k, **fams[fam])
        for mode in (heur.HEURISTIC, heur.RANDOM):
            cfg = SearchConfig(relaxation_mode="s", sbar=2, scenario_mode=mode, seed=k, restart_first=4)
            r1, r2 = solve(inst, cfg), solve(inst, cfg)
            reps += 1
            diff += repr(r1) != repr(r2) or r1 != r2
    ok = calls == 10_000 and bad == 0 and diff == 0
    report(6, ok, f"{calls} build_scenario calls, {bad} illegal or irreproducible; "
                  f"{reps} repeated solves, {diff} differing")


@pytest.mark.slow
def test_criterion_7_pruning_soundness(report, suite):
    t0 = time.perf_counter()
    bad, changed = [], 0
    for k, (fam, p, inst, expected) in enumerate(suite):
        mode, sbar = MODE_GRID[k % len(MODE_GRID)]
        on = solve(inst, SearchConfig(relaxation_mode=mode, sbar=sbar, seed=k))
        off = solve(inst, SearchConfig(relaxation_mode=mode, sbar=sbar, seed=k, pruning=False))
        if on.value != off.value or on.status is not off.status or off.value != expected:
            bad.append((k, fam, mode, sbar, on.value, off.value))
        changed += on.stats.decision_nodes != off.stats.decision_nodes
    elapsed = time.perf_counter() - t0
    report(7, not bad, f"{len(suite)} instances, node counts changed on {changed}, "
                       f"{len(bad)} value or verdict changes, {elapsed:.0f} s")


def test_criterion_8_lp_core(report):
    rng = np.random.default_rng(8)
    bad, infeasible = [], 0
    for t in range(500):
        n, m = int(rng.integers(1, 9)), int(rng.integers(0, 9))
        A = rng.integers(-5, 6, (m, n)).astype(float)
        b = rng.integers(-3, 10, m).astype(float)
        c = rng.integers(-5, 6, n).astype(float)
        lo = rng.integers(-2, 1, n).astype(float)
        hi = lo + rng.integers(0, 4, n)
        expected = vertex_lp(c, A, b, lo, hi)
        out = solve_lp(LinearProgram(c, A, b, lo, hi))
        if expected is None:
            infeasible += 1
            if out.status is not LpStatus.INFEASIBLE:
                bad.append((t, "should be infeasible"))
        elif out.status is not LpStatus.OPTIMAL or abs(out.value - expected) > TOL:
            bad.append((t, out.value, expected))

    inst = golden_game()
    table = []
    for scen, x3 in (((1, 0), 1), ((1, 1), 0)):
        out = solve_relaxation_lp(inst, fixed_scenario_lp(inst, scen))
        table.append(abs(out.bound + 2) <= TOL and abs(out.node_assignment[0] - 1) <= TOL
                     and abs(out.node_assignment[2] - x3) <= TOL)
    dep = solve_dep(inst, [(1, 0), (1, 1)])
    table.append(abs(dep.bound + 1) <= TOL)
    ok = not bad and all(table)
    report(8, ok, f"500 LPs ({infeasible} infeasible), {len(bad)} mismatches; golden-game LPs "
                  f"{sum(table)}/3 match" + (f"; first {bad[0]}" if bad else ""))
