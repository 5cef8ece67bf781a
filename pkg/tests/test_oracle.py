from dataclasses import replace

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from qsdkit.fixtures import chain_A, chain_B, chain_D, dag4, random_reducible, two_leaders_fed
from qsdkit.oracle import (check_limit, check_invariants, conditional_law,
                           estimate_j, estimate_theta, fit_envelope, monte_carlo_conditional,
                           trace)
from qsdkit.synthesis import synthesize


def test_estimate_theta_close_to_certificate():
    for make in (chain_A, chain_D):
        ch = make()
        for x in range(ch.d):
            assert abs(estimate_theta(ch, x, 2000) - 0.5) <= 1e-3


def test_estimate_j_chain_D():
    ch = chain_D()
    est = [estimate_j(ch, x, 0.5, 4000) for x in range(3)]
    assert [e.j for e in est] == [0, 1, 2]
    # frozen from an independent run of the dyadic estimator
    assert [round(e.unrounded, 3) for e in est] == [0.0, 0.999, 1.999]


def test_slower_state_is_subleading():
    est = estimate_j(dag4(), 1, 0.5, 4000)
    assert est.subleading and est.j == 0


def test_chain_A_residual_is_exactly_one_over_n():
    ch = chain_A()
    lc = check_limit(ch, synthesize(ch), x=1, n_max=300)
    assert lc.passed
    assert np.allclose(lc.n * lc.residual, 1.0, atol=1e-9)


def test_chain_B_residual_is_geometric():
    ch = chain_B()
    lc = check_limit(ch, synthesize(ch), x=1, n_max=200)
    assert lc.passed and lc.measured_ratio == pytest.approx(0.4, abs=1e-6)


def test_invariants_pass_and_corruption_is_caught():
    ch = two_leaders_fed()
    cert = synthesize(ch)
    assert check_invariants(ch, cert).passed
    bad_nu = cert.nu.copy()
    bad_nu[0] = np.roll(bad_nu[0], 1)
    rep = check_invariants(ch, replace(cert, nu=bad_nu))
    assert "fixed_point" in rep.failed()
    bad_j = cert.j_state.copy()
    bad_j[0] = 1
    rep = check_invariants(ch, replace(cert, j_state=bad_j))
    assert "monotone_j" in rep.failed() or "masked_identity" in rep.failed()


def test_conditional_law_matches_matrix_powers():
    ch = chain_D()
    mu = np.array([0.0, 0.0, 1.0])
    law = conditional_law(ch, mu, 30, synthesize(ch))
    raw = mu @ np.linalg.matrix_power(ch.dense(), 30)
    assert np.allclose(law.law, raw / raw.sum(), rtol=1e-13)
    assert law.passed


def test_monte_carlo_is_reproducible_and_consistent():
    ch = chain_B()
    a = monte_carlo_conditional(ch, 1, 5, 200_000, seed=7)
    b = monte_carlo_conditional(ch, 1, 5, 200_000, seed=7)
    assert np.array_equal(a.counts, b.counts)
    exact = conditional_law(ch, np.array([0.0, 1.0]), 5).law
    ok, _ = a.agrees_with(exact)
    assert ok


def test_fit_envelope_rejects_growth():
    n = np.arange(1, 101)
    assert fit_envelope(n, 1.0 / n, 1.0 / n).passed
    assert not fit_envelope(n, 1e-3 * n, 1.0 / n).passed


def test_trace_report_fields():
    ch = chain_A()
    tr = trace(ch, synthesize(ch), n_max=400)
    d = tr.as_dict()
    assert d["j_hat"] == [0, 1]
    assert len(d["residual"]) == 2


@settings(max_examples=40, deadline=None)
@given(seed=st.integers(0, 10**6))
def test_random_certificates_satisfy_all_invariants(seed):
    ch, _ = random_reducible(seed, 0)
    rep = check_invariants(ch, synthesize(ch))
    assert rep.passed, rep.as_dict()
