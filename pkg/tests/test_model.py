import itertools
from fractions import Fraction

import pytest
from hypothesis import given, settings, strategies as st

from qipsolver.instances import generate
from qipsolver.model import (
    EXISTS,
    FORALL,
    LOSS,
    InstanceError,
    ParseError,
    QipInstance,
    Row,
    evaluate_play,
    finite,
    golden_game,
    is_legal_universal,
    parse_instance,
    validate_instance,
    write_instance,
)
from qipsolver.oracle import enumerate_uncertainty_set


def test_golden_is_valid():
    assert validate_instance(golden_game()) == []


def test_golden_plays():
    inst = golden_game()
    assert evaluate_play(inst, (1, 1, 0, 0)) == finite(-1)
    assert evaluate_play(inst, (1, 1, 1, 1)).is_loss


def test_all_zero_play_is_free_when_rhs_nonnegative():
    inst = golden_game()
    assert evaluate_play(inst, (0, 0, 0, 0)) == finite(0)


def test_loss_dominates_every_finite_payoff():
    assert LOSS > finite(10 ** 9)
    assert finite(-3) < finite(Fraction(-5, 2)) < LOSS
    assert max(finite(2), LOSS) == LOSS


def test_evaluate_play_rejects_wrong_length():
    with pytest.raises(ValueError):
        evaluate_play(golden_game(), (1, 1, 0))


def test_existential_column_in_universal_rows_is_reported():
    with pytest.raises(InstanceError) as err:
        QipInstance.build([(EXISTS, 1), (FORALL, 1), (EXISTS, 1)], [0, 0, 0], [], [({0: 1, 1: 1}, 1)])
    assert any("x1" in v or "existential" in v for v in err.value.violations)


def test_empty_uncertainty_set_is_reported():
    with pytest.raises(InstanceError) as err:
        QipInstance.build([(EXISTS, 1), (FORALL, 1), (EXISTS, 0)], [0, 0], [], [({}, -1)])
    assert any("empty uncertainty set" in v for v in err.value.violations)


def test_first_block_must_be_existential():
    with pytest.raises(InstanceError):
        QipInstance.build([(FORALL, 1), (EXISTS, 1)], [0, 0], [], [])


def test_blocks_must_alternate():
    with pytest.raises(InstanceError):
        QipInstance.build([(EXISTS, 1), (EXISTS, 1)], [0, 0], [], [])


def test_row_make_merges_and_drops_zero_terms():
    r = Row.make([(2, 1), (0, 3), (2, -1), (1, Fraction(1, 2))], 4)
    assert r.coeffs == ((0, Fraction(3)), (1, Fraction(1, 2)))
    assert r.activity([1, 2, 7]) == 4


def _one_hot_instance():
    return QipInstance.build(
        [(EXISTS, 1), (FORALL, 3), (EXISTS, 1)],
        [1, 0, 0, 0, 1],
        [({0: 1, 4: 1}, 1)],
        [({1: 1, 2: 1, 3: 1}, 1), ({1: -1, 2: -1, 3: -1}, -1)],
    )


def test_one_hot_legality_blocks_second_indicator():
    inst = _one_hot_instance()
    partial = [None, 1, None, None, None]
    assert not is_legal_universal(inst, partial, 2, 1)
    assert is_legal_universal(inst, partial, 2, 0)


def test_legality_on_golden_is_unconstrained():
    inst = golden_game()
    for var, val in itertools.product((1, 3), (0, 1)):
        assert is_legal_universal(inst, [None] * 4, var, val)


def test_legality_rejects_existential_variable():
    with pytest.raises(ValueError):
        is_legal_universal(golden_game(), [None] * 4, 0, 1)


def _legal_by_enumeration(inst, partial, var, value):
    uv = inst.universal_vars
    for combo in itertools.product((0, 1), repeat=len(uv)):
        x = dict(zip(uv, combo))
        if x[var] != value or any(partial[j] is not None and partial[j] != x[j] for j in uv):
            continue
        if all(sum(a * x[j] for j, a in r.coeffs) <= r.rhs for r in inst.univ_rows):
            return True
    return False


@settings(max_examples=40, deadline=None)
@given(seed=st.integers(0, 10 ** 6), data=st.data())
def test_legality_matches_enumeration_on_runway(seed, data):
    inst = generate("runway", A=2, S=3, b=1, T=1, seed=seed)
    uv = inst.universal_vars
    assert len(uv) <= 12
    legal = enumerate_uncertainty_set(inst)
    scenario = data.draw(st.sampled_from(legal))
    k = data.draw(st.integers(0, len(uv) - 1))
    partial = [None] * inst.num_vars
    for j, v in zip(uv[:k], scenario):
        partial[j] = v
    for v in (0, 1):
        assert is_legal_universal(inst, partial, uv[k], v) == _legal_by_enumeration(inst, partial, uv[k], v)


def test_write_parse_round_trip_golden():
    inst = golden_game()
    again = parse_instance(write_instance(inst))
    assert again == inst
    assert evaluate_play(again, (1, 1, 0, 0)) == finite(-1)


def test_parse_accepts_missing_objective():
    inst = parse_instance("NVARS 2\nBLOCKS 1:E 1:A 0:E\nEXISTS 1:1 <= 1\n")
    assert list(inst.objective) == [0, 0]


def test_parse_rejects_wrong_block_total():
    with pytest.raises(ParseError) as err:
        parse_instance("NVARS 3\nBLOCKS 1:E 1:A 0:E\n")
    assert "expected 3" in str(err.value)
    assert err.value.lineno == 2


def test_parse_reports_line_of_bad_token():
    with pytest.raises(ParseError) as err:
        parse_instance("NVARS 2\nBLOCKS 1:E 1:A 0:E\nOBJ 1:x\n")
    assert err.value.lineno == 3


def test_parse_rational_coefficients():
    inst = parse_instance("NVARS 2  # two\nBLOCKS 1:E 1:A 0:E\nOBJ 1:-3/4 2:2\nEXISTS 1:1/2 2:1 <= 3/2\n")
    assert inst.objective[0] == Fraction(-3, 4)
    assert evaluate_play(inst, (1, 1)) == finite(Fraction(5, 4))


@settings(max_examples=60, deadline=None)
@given(family=st.sampled_from(["selection", "assignment", "runway"]), seed=st.integers(0, 2 ** 31))
def test_round_trip_generated(family, seed):
    params = {"selection": dict(n=4, N=2, T=2), "assignment": dict(n=2, N=2, T=1),
              "runway": dict(A=2, S=3, b=1, T=2)}[family]
    inst = generate(family, seed=seed, **params)
    assert parse_instance(write_instance(inst)) == inst


@settings(max_examples=60, deadline=None)
@given(seed=st.integers(0, 2 ** 31), bump=st.integers(0, 3), data=st.data())
def test_more_slack_never_creates_a_loss(seed, bump, data):
    inst = generate("selection", n=3, N=2, T=1, seed=seed)
    play = tuple(data.draw(st.integers(0, 1)) for _ in range(inst.num_vars))
    looser = inst.with_exist_rows([Row(r.coeffs, r.rhs + bump) for r in inst.exist_rows])
    if not evaluate_play(inst, play).is_loss:
        assert evaluate_play(looser, play) == evaluate_play(inst, play)
