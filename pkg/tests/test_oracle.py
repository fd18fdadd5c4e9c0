import itertools

import pytest
from hypothesis import given, settings, strategies as st

from oracles import brute_minimax
from qipsolver.instances import generate
from qipsolver.model import EXISTS, FORALL, QipInstance, Row, evaluate_play, finite, golden_game
from qipsolver.oracle import OracleCapExceeded, OracleStatus, enumerate_uncertainty_set, minimax_oracle


def test_golden_value_and_pv():
    res = minimax_oracle(golden_game())
    assert res.status is OracleStatus.FEASIBLE
    assert res.value == -1
    assert res.principal_variation == (1, 1, 0, 0)
    assert res.optimal_first_stage == frozenset({(1,)})


def test_infeasible_instance():
    inst = golden_game().with_exist_rows(list(golden_game().exist_rows) + [Row.make({0: -1}, -2)])
    res = minimax_oracle(inst)
    assert res.status is OracleStatus.INFEASIBLE and res.value is None


def test_cap_is_enforced():
    with pytest.raises(OracleCapExceeded):
        minimax_oracle(generate("selection", n=4, N=2, T=2, seed=0), cap=10)


def test_uncertainty_set_of_golden_is_the_full_cube():
    assert enumerate_uncertainty_set(golden_game()) == [(0, 0), (0, 1), (1, 0), (1, 1)]


def test_one_hot_blocks_have_n_completions_each():
    inst = generate("selection", n=2, N=3, T=2, seed=0)
    assert len(enumerate_uncertainty_set(inst)) == 9


def test_universal_var_cap():
    with pytest.raises(OracleCapExceeded):
        enumerate_uncertainty_set(generate("selection", n=2, N=3, T=2, seed=0), max_vars=4)


def test_pv_replays_to_value():
    inst = generate("assignment", n=2, N=2, T=2, seed=4)
    res = minimax_oracle(inst, memo=True)
    assert evaluate_play(inst, res.principal_variation) == finite(res.value)


def _tiny_random_instance(data):
    sizes = [data.draw(st.integers(1, 2)), data.draw(st.integers(1, 2)), data.draw(st.integers(1, 2))]
    blocks = [(EXISTS, sizes[0]), (FORALL, sizes[1]), (EXISTS, sizes[2])]
    n = sum(sizes)
    coef = st.integers(-2, 2)
    obj = [data.draw(coef) for _ in range(n)]
    rows = [({j: data.draw(coef) for j in range(n)}, data.draw(st.integers(-1, 3)))
            for _ in range(data.draw(st.integers(1, 3)))]
    uvars = range(sizes[0], sizes[0] + sizes[1])
    univ = []
    if data.draw(st.booleans()):
        univ.append(({j: 1 for j in uvars}, data.draw(st.integers(0, sizes[1]))))
    return QipInstance.build(blocks, obj, rows, univ)


@settings(max_examples=150, deadline=None)
@given(st.data())
def test_matches_plain_recursion(data):
    inst = _tiny_random_instance(data)
    expected = brute_minimax(inst)
    for memo in (False, True):
        res = minimax_oracle(inst, memo=memo)
        assert res.value == expected
        if expected is not None:
            assert evaluate_play(inst, res.principal_variation) == finite(expected)


@settings(max_examples=20, deadline=None)
@given(seed=st.integers(0, 2 ** 31))
def test_memo_agrees_on_generated(seed):
    inst = generate("selection", n=3, N=2, T=2, seed=seed)
    a, b = minimax_oracle(inst), minimax_oracle(inst, memo=True)
    assert a.value == b.value and a.optimal_first_stage == b.optimal_first_stage


def test_optimal_first_stage_lists_every_minimizer():
    inst = generate("selection", n=2, p=2, N=1, T=1, seed=0, initial_cost=(5, 5), scenario_cost=(5, 5))
    res = minimax_oracle(inst)
    assert res.value == 10
    assert res.optimal_first_stage == frozenset(itertools.product((0, 1), repeat=2))
