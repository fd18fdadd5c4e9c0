import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from qipsolver import heur
from qipsolver.heur import HeuristicState, build_scenario, on_conflict, rebuild_scenario_set, record_visit
from qipsolver.instances import generate
from qipsolver.model import golden_game
from qipsolver.oracle import enumerate_uncertainty_set


def test_conflict_bumps_literals_from_zero():
    s = on_conflict(HeuristicState(6), [], [(2, 1), (4, 0)])
    expected = np.zeros((6, 2))
    expected[2, 1] = expected[4, 0] = 1
    assert np.array_equal(s.vsids, expected)


def test_decay_halves_every_counter():
    s = HeuristicState(3, decay_period=10 ** 9)
    on_conflict(s, [], [(0, 1), (1, 0)])
    on_conflict(s, [], [(0, 1)])
    heur.decay(s)
    assert s.vsids[0, 1] == 1.0 and s.vsids[1, 0] == 0.5


def test_periodic_decay():
    s = HeuristicState(2, decay_period=2)
    on_conflict(s, [], [(0, 0)])
    on_conflict(s, [], [(0, 0)])
    assert s.vsids[0, 0] == 1.0


def test_killer_overwrites_only_assigned():
    s = on_conflict(HeuristicState(5), [(1, 1)], [])
    assert s.killer[1] == 1 and s.killer[3] is None
    on_conflict(s, [(1, 0), (3, 1)], [])
    assert s.killer[1] == 0 and s.killer[3] == 1


def test_visit_counts_follow_prefix_paths():
    s = HeuristicState(4)
    for p in [(1,), (1, 0), (1, 1)]:
        record_visit(s, p)
    assert s.count((1,)) == 3 and s.count((1, 0)) == 1 and s.count((1, 1)) == 1


def test_no_visits_means_empty_top():
    assert HeuristicState(3).top(5) == []


def test_repeated_visit():
    s = HeuristicState(4)
    for _ in range(5):
        record_visit(s, (0, 1))
    assert s.count((0,)) == 5


def test_top_prefers_counts_then_depth_then_lex():
    s = HeuristicState(4)
    record_visit(s, (1, 0))
    record_visit(s, (0, 1))
    assert [p for p, _ in s.top(4)] == [(0, 1), (1, 0), (0,), (1,)]


def test_killer_scenario_on_golden():
    s = HeuristicState(4)
    s.killer[1] = s.killer[3] = 1
    assert build_scenario(golden_game(), s, [None] * 4, np.random.default_rng(0)) == (1, 1)


def test_fresh_state_prefers_zero():
    assert build_scenario(golden_game(), HeuristicState(4), [None] * 4, np.random.default_rng(0)) == (0, 0)


def test_one_hot_killer_conflict_is_repaired():
    inst = generate("selection", n=2, N=3, T=1, seed=0)
    s = HeuristicState(inst.num_vars)
    for j in inst.universal_vars:
        s.killer[j] = 1
    for seed in range(10):
        scen = build_scenario(inst, s, [None] * inst.num_vars, np.random.default_rng(seed))
        assert sum(scen) == 1


def test_scenario_extends_partial():
    inst = generate("selection", n=2, N=3, T=2, seed=0)
    uv = inst.universal_vars
    partial = [None] * inst.num_vars
    partial[uv[1]] = 1
    scen = build_scenario(inst, HeuristicState(inst.num_vars), partial, np.random.default_rng(1))
    assert scen[1] == 1 and scen[0] == 0 and scen[2] == 0


def test_unextendible_partial_is_an_error():
    inst = generate("selection", n=2, N=3, T=1, seed=0)
    partial = [None] * inst.num_vars
    for j in inst.universal_vars:
        partial[j] = 1
    with pytest.raises(ValueError):
        build_scenario(inst, HeuristicState(inst.num_vars), partial, np.random.default_rng(0))


def test_rebuild_with_zero_capacity_is_empty():
    inst = golden_game()
    s = HeuristicState(4)
    record_visit(s, (1, 0))
    assert len(rebuild_scenario_set(inst, s, 0, np.random.default_rng(0))) == 0


def test_rebuild_returns_visited_full_scenarios():
    inst = golden_game()
    s = HeuristicState(4)
    for _ in range(3):
        record_visit(s, (1, 0))
    for _ in range(3):
        record_visit(s, (0, 1))
    got = rebuild_scenario_set(inst, s, 2, np.random.default_rng(0))
    assert set(got) == {(1, 0), (0, 1)}


def test_rebuild_deduplicates_extensions():
    inst = golden_game()
    s = HeuristicState(4)
    record_visit(s, (1, 0))
    s.killer[3] = 0
    # top two entries are (1, 0) and its prefix (1,), which extends to (1, 0) again
    got = rebuild_scenario_set(inst, s, 2, np.random.default_rng(0))
    assert got.scenarios == ((1, 0),)


def test_rebuild_after_concentrated_visits_keeps_prefix():
    inst = golden_game()
    s = HeuristicState(4)
    for v in (0, 1, 1):
        record_visit(s, (1, v))
    for sc in rebuild_scenario_set(inst, s, 3, np.random.default_rng(2)):
        assert sc[0] == 1


@settings(max_examples=40, deadline=None)
@given(family=st.sampled_from(["selection", "assignment", "runway"]), seed=st.integers(0, 2 ** 31),
       rseed=st.integers(0, 2 ** 31), mode=st.sampled_from([heur.HEURISTIC, heur.RANDOM]), data=st.data())
def test_built_scenarios_are_legal_and_reproducible(family, seed, rseed, mode, data):
    params = {"selection": dict(n=3, N=3, T=2), "assignment": dict(n=2, N=3, T=2),
              "runway": dict(A=2, S=4, b=1, T=2)}[family]
    inst = generate(family, seed=seed, **params)
    legal = set(enumerate_uncertainty_set(inst))
    s = HeuristicState(inst.num_vars)
    for j in inst.universal_vars:
        if data.draw(st.booleans()):
            s.killer[j] = data.draw(st.integers(0, 1))
        s.vsids[j] = [data.draw(st.integers(0, 3)), data.draw(st.integers(0, 3))]
    a = build_scenario(inst, s, [None] * inst.num_vars, np.random.default_rng(rseed), mode)
    b = build_scenario(inst, s, [None] * inst.num_vars, np.random.default_rng(rseed), mode)
    assert a in legal and a == b
    rebuilt = rebuild_scenario_set(inst, s, 4, np.random.default_rng(rseed), mode)
    assert len(set(rebuilt)) == len(rebuilt) <= 4
    assert all(sc in legal for sc in rebuilt)


@settings(max_examples=50, deadline=None)
@given(counts=st.lists(st.tuples(st.integers(0, 5), st.integers(0, 1), st.floats(0, 100)), min_size=1, max_size=20))
def test_decay_preserves_preferred_polarity(counts):
    s = HeuristicState(6)
    for j, p, v in counts:
        s.vsids[j, p] += v
    before = [s.preferred_value(j) for j in range(6)]
    heur.decay(s)
    assert [s.preferred_value(j) for j in range(6)] == before
