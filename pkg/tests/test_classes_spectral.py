import warnings

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from qsdkit.chain import AbsorbedChain
from qsdkit.classes import find_classes, j_from_levels, polynomial_parameter, stratify
from qsdkit.fixtures import chain_A, chain_D, dag4, random_reducible, two_leaders
from qsdkit.spectral import _bisect_root, _power_perron, perron, period, spectral_radius


def _stratified(ch):
    g = find_classes(ch)
    return stratify(g, np.array([perron(ch, c).theta for c in g.classes]))


def test_classes_of_chain_A():
    g = find_classes(chain_A())
    assert [c.tolist() for c in g.classes] == [[0], [1]]
    assert sorted(g.edges) == [(1, 0)]
    assert g.precedes(0, 1)
    assert g.topological_order().index(0) < g.topological_order().index(1)


def test_dag4_strata():
    g = _stratified(dag4())
    assert g.theta_bar == 0.5
    assert g.fbar == (0, 3)
    assert g.fbar_levels == ((0,), (3,))
    assert g.jbar_levels == ((0, 2), (3,))
    assert g.remainder == (1,)
    assert g.j_class.tolist() == [0, 0, 0, 1]
    assert np.array_equal(polynomial_parameter(g), j_from_levels(g))


def test_chain_D_levels():
    g = _stratified(chain_D())
    assert g.fbar_levels == ((0,), (1,), (2,))
    assert g.j_state().tolist() == [0, 1, 2]


def test_disconnected_components():
    g = find_classes(two_leaders())
    assert len(g.components()) == 2


def test_fragile_stratification_warning():
    p = np.diag([0.5, 0.5 * (1 - 5e-7)])
    p[1, 0] = 0.1
    ch = AbsorbedChain.from_dense(p)
    g = find_classes(ch)
    with pytest.warns(UserWarning, match="fragile"):
        s = stratify(g, np.diag(p))
    assert s.fbar == (0,)
    assert s.warnings


@settings(max_examples=40, deadline=None)
@given(seed=st.integers(0, 5000))
def test_dp_agrees_with_level_sets(seed):
    ch, _ = random_reducible(3, seed)
    g = _stratified(ch)
    assert np.array_equal(polynomial_parameter(g), j_from_levels(g))


@settings(max_examples=25, deadline=None)
@given(seed=st.integers(0, 5000), pseed=st.integers(0, 2**31))
def test_exponent_is_permutation_invariant(seed, pseed):
    ch, _ = random_reducible(5, seed)
    perm = np.random.default_rng(pseed).permutation(ch.d)
    j = _stratified(ch).j_state()
    jp = _stratified(ch.permute(perm)).j_state()
    # permute(perm) puts old state perm[k] at position k
    assert np.array_equal(jp, j[perm])


def test_perron_two_by_two_closed_form():
    ch = AbsorbedChain.from_dense([[0.3, 0.2], [0.2, 0.3]])
    s = perron(ch, [0, 1])
    assert s.theta == pytest.approx(0.5, abs=1e-14)
    assert np.allclose(s.nu, [0.5, 0.5])
    assert s.nu @ s.eta == pytest.approx(1.0)
    assert s.gap == pytest.approx(0.2, abs=1e-12)


def test_dead_singleton():
    s = perron(AbsorbedChain.from_dense([[0.0, 0.5], [0.0, 0.5]]), [0])
    assert s.dead and s.theta == 0.0 and s.warnings


def test_period_of_cycle():
    ch = AbsorbedChain.from_dense([[0.0, 0.9, 0.0], [0.0, 0.0, 0.9], [0.9, 0.0, 0.0]])
    assert period(ch, [0, 1, 2]) == 3
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        s = perron(ch, [0, 1, 2])
    assert s.periodic and s.theta == pytest.approx(0.9)


def _random_block(seed, d):
    rng = np.random.default_rng(seed)
    a = rng.random((d, d)) * (rng.random((d, d)) < 0.1)
    a[np.arange(d), (np.arange(d) + 1) % d] += 0.5
    a /= a.sum(axis=1, keepdims=True) * 1.25
    return a


def test_large_block_power_iteration_matches_dense():
    a = _random_block(1, 90)
    ch = AbsorbedChain.from_dense(a)
    s = perron(ch, np.arange(90))
    w = np.linalg.eigvals(a)
    assert s.theta == pytest.approx(np.max(w.real), rel=1e-12)
    assert np.abs(a.T @ s.nu - s.theta * s.nu).sum() <= 1e-12


def test_bisection_root_matches_power_iteration():
    import scipy.sparse as sp
    b = sp.csr_matrix(_random_block(2, 80))
    theta, *_ = _power_perron(b, 1)
    assert _bisect_root(b) == pytest.approx(theta, rel=1e-13)


def test_spectral_radius_of_reducible_block():
    assert spectral_radius(dag4()) == 0.5
    assert spectral_radius(dag4(), [1, 2]) == pytest.approx(0.3)
