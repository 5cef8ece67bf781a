import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from qsdkit.dsl import (BinOp, Call, Neg, Num, Var, build_truncation, drift_ratio, evaluate,
                        format_expression, format_rules, lyapunov_check, parse_expression,
                        parse_rules, qsd_stability, truncation_survival)
from qsdkit.errors import EvaluationError, RuleSyntaxError
from qsdkit.fixtures import DOWN_CHAIN, DOWNWARD_DRIFT, TWO_LANE, UPWARD_DRIFT


def test_two_rule_set_round_trips():
    rs = parse_rules("to = x+1 ; p = 0.3\nto = x-1 ; p = min(0.6, 0.1*x)\n")
    assert len(rs) == 2
    assert parse_rules(format_rules(rs)) == rs


def test_missing_operand_reports_operator_column():
    with pytest.raises(RuleSyntaxError) as info:
        parse_rules("to = x* ; p = 1")
    assert (info.value.line, info.value.column) == (1, 7)


def test_errors_carry_line_numbers():
    with pytest.raises(RuleSyntaxError) as info:
        parse_rules("# header\nto = x ; p = 1\nto = y ; p = 1")
    assert (info.value.line, info.value.column) == (3, 6)
    with pytest.raises(RuleSyntaxError):
        parse_rules("to = min(x) ; p = 1")
    with pytest.raises(RuleSyntaxError):
        parse_rules("to = x ; q = 1")


def test_decaying_probability():
    rs = parse_rules("to = max(x-1,0) ; p = 0.5/pow(2, x)")
    assert evaluate(rs.rules[0].prob, [0, 1, 2]).tolist() == [0.5, 0.25, 0.125]


def test_division_by_zero_carries_state():
    with pytest.raises(EvaluationError) as info:
        evaluate(parse_expression("1/(x-3)"), np.arange(6))
    assert info.value.x == 3


def test_drift_truncation_rows():
    t = build_truncation(parse_rules(DOWNWARD_DRIFT), 200)
    p = t.chain.dense() if t.chain.d <= 64 else t.chain.matrix.toarray()
    assert p[0, 0] == 0.4 and p[0, 1] == 0.2
    assert p[57, 56] == 0.7 and p[57, 58] == 0.2
    assert p[199].sum() == pytest.approx(0.7)          # up-move killed at the boundary
    assert t.V[10] == pytest.approx(1.5 ** 10)


def test_single_state_truncation():
    t = build_truncation(parse_rules(DOWNWARD_DRIFT), 1)
    assert t.chain.dense().tolist() == [[0.4]]


def test_excess_probability_is_rejected():
    with pytest.raises(EvaluationError) as info:
        build_truncation(parse_rules("to = x ; p = 1.2"), 5)
    assert info.value.x == 0
    with pytest.raises(EvaluationError):
        build_truncation(parse_rules("to = x ; p = x - 2"), 5)


def test_non_integer_target_warns():
    with pytest.warns(UserWarning, match="non-integer"):
        t = build_truncation(parse_rules("to = x + 0.5 ; p = 0.5"), 4)
    assert t.warnings


def test_drift_ratio_formula():
    r = drift_ratio(parse_rules(DOWNWARD_DRIFT), "pow(1.5, x)", np.arange(1, 50))
    assert np.allclose(r, 0.2 * 1.5 + 0.7 / 1.5)


def test_constant_weight_fails_the_criterion():
    rep = lyapunov_check(parse_rules(DOWNWARD_DRIFT), "1", 200, 400)
    assert not rep.drift_ok and rep.tail_sup == pytest.approx(0.9)


def test_acyclic_chain_has_no_return_state():
    rep = lyapunov_check(parse_rules(DOWN_CHAIN), None, 10, 20)
    assert not rep.has_cycle
    assert any("no x_0" in d for d in rep.diagnostics)


def test_steeper_weight_satisfies_criterion():
    rep = lyapunov_check(parse_rules(DOWNWARD_DRIFT), "pow(1.8, x)", 200, 400)
    assert rep.passed and rep.tail_sup == pytest.approx(0.2 * 1.8 + 0.7 / 1.8)


def test_downward_drift_is_stable():
    st_ = qsd_stability(parse_rules(DOWNWARD_DRIFT), None, [100, 200, 400])
    assert st_.stable
    assert st_.theta_drift[-1] <= 1e-10
    nu = st_.certificates[-1].on(400)[0][0]
    assert np.allclose(nu[:20], 0.5 ** np.arange(1, 21), rtol=1e-10)
    assert any("consistent with" in d for d in st_.diagnostics)


def test_two_lane_tie_gives_exponent_one_on_lane_B():
    st_ = qsd_stability(parse_rules(TWO_LANE), None, [200, 400, 800])
    assert st_.stable
    j = st_.certificates[-1].on(800)[2]
    assert set(j[0::2]) == {0} and set(j[1::2]) == {1}


def test_upward_drift_is_unstable():
    st_ = qsd_stability(parse_rules(UPWARD_DRIFT), None, [50, 100, 200])
    assert not st_.stable and st_.diagnostics


def test_survival_increases_with_window():
    rs = parse_rules(DOWNWARD_DRIFT)
    surv = truncation_survival(rs, [5, 10, 20, 40], x=3, n_max=100)
    assert np.all(np.diff(surv, axis=0) >= -1e-15)


@settings(max_examples=30, deadline=None)
@given(x=st.integers(0, 15), n1=st.integers(2, 30), extra=st.integers(1, 30))
def test_truncation_monotone_in_N(x, n1, extra):
    rs = parse_rules(TWO_LANE)
    x = min(x, n1 - 1)
    s = truncation_survival(rs, [n1, n1 + extra], x=x, n_max=100)
    assert np.all(s[1] >= s[0] - 1e-15)


def _exprs():
    leaves = st.one_of(st.just(Var()),
                       st.floats(0, 1e6, allow_nan=False).map(Num))
    return st.recursive(leaves, lambda inner: st.one_of(
        st.builds(BinOp, st.sampled_from("+-*/"), inner, inner),
        st.builds(Neg, inner),
        st.builds(lambda f, a, b: Call(f, (a, b)), st.sampled_from(["min", "max", "pow"]),
                  inner, inner)), max_leaves=12)


@settings(max_examples=200, deadline=None)
@given(_exprs())
def test_printer_round_trip(node):
    text = format_expression(node)
    again = parse_expression(text)
    assert again == node
    assert format_expression(again) == text
