"""The twelve acceptance criteria, each at its stated tolerance.

Every test prints one ``criterion N: PASS|FAIL`` line; the lines are also
collected into the pytest terminal summary.  Run alone with::

    pytest tests/test_acceptance.py -v -s
"""

import numpy as np

from qsdkit.classes import THETA_TOL, find_classes, polynomial_parameter, stratify
from qsdkit.chain import step_measure
from qsdkit.dsl import lyapunov_check, parse_rules, qsd_stability
from qsdkit.fixtures import (DOWNWARD_DRIFT, NAMED, chain_A, chain_B, chain_C, chain_D,
                             dag4, random_chains, two_leaders)
from qsdkit.operators import COMPOSE, random_instance
from qsdkit.oracle import (check_limit, check_invariants, conditional_law,
                           estimate_j, masked_identity_error, monte_carlo_conditional)
from qsdkit.spectral import perron
from qsdkit.synthesis import qsd_simplex, synthesize

RANDOM = random_chains(seed=0, count=50)
FIXTURES = [f() for f in NAMED.values()]


def _survival(p, x, n):
    # brute force: x-th row sum of the n-th matrix power
    return np.linalg.matrix_power(np.asarray(p), n)[x].sum()


def test_criterion_01_chain_A(record):
    ch = chain_A()
    cert = synthesize(ch)
    nu, eta, j = cert.on(2)
    ns = np.arange(1, 201)
    m = np.array([_survival(ch.dense(), 1, n) / 0.5 ** n for n in ns])
    closed = np.max(np.abs(m - (1 + 0.6 * ns)) / (1 + 0.6 * ns))
    lc = check_limit(ch, cert, x=1, n_max=400)
    nres = lc.n * lc.residual
    ok = (abs(cert.theta_bar - 0.5) <= THETA_TOL and j.tolist() == [0, 1]
          and np.allclose(eta[0], [1.0, 0.6], rtol=0, atol=1e-9)
          and np.array_equal(nu[0], [1.0, 0.0]) and closed <= 1e-12
          and np.max(np.abs(nres - 1)) <= 1e-9)
    record(1, ok, f"theta={cert.theta_bar!r} j={j.tolist()} eta={eta[0].tolist()} "
                  f"nu={nu[0].tolist()} closed-form err={closed:.1e} "
                  f"max|n*res-1|={np.max(np.abs(nres - 1)):.1e}")


def test_criterion_02_chain_B(record):
    ch = chain_B()
    cert = synthesize(ch)
    nu = cert.on(2)[0][0]
    fp = np.abs(step_measure(ch, nu) - 0.5 * nu).sum()
    ok = np.allclose(nu, [0.6, 0.4], rtol=0, atol=1e-10) and fp <= 1e-12
    record(2, ok, f"nu={nu.tolist()} fixed-point residual={fp:.1e}")


def test_criterion_03_chain_C(record):
    cert = synthesize(chain_C())
    e = cert.on(2)[1].sum(axis=0)
    record(3, abs(e[0] - 5 / 3) <= 1e-9, f"eta_S(0)={float(e[0])!r}")


def test_criterion_04_chain_D(record):
    ch = chain_D()
    cert = synthesize(ch)
    j = cert.on(3)[2]
    ests = [estimate_j(ch, x, cert.theta_bar, n_max=4000) for x in range(3)]
    g = find_classes(ch)
    g = stratify(g, np.array([perron(ch, c).theta for c in g.classes]))
    dp = polynomial_parameter(g)[g.class_of]
    ok = (j.tolist() == [0, 1, 2] and [e.j for e in ests] == [0, 1, 2]
          and all(abs(e.unrounded - e.j) < 0.1 for e in ests) and dp.tolist() == [0, 1, 2])
    record(4, ok, f"j={j.tolist()} estimates={[round(e.unrounded, 4) for e in ests]} "
                  f"dp={dp.tolist()}")


def test_criterion_05_dag4(record):
    cert = synthesize(dag4())
    _, eta, j = cert.on(4)
    pos = np.flatnonzero(eta[0] > 0).tolist()
    ok = j.tolist() == [0, 0, 0, 1] and eta.shape[0] == 1 and pos == [0, 2, 3] and eta[0, 1] == 0.0
    record(5, ok, f"j={j.tolist()} eta={eta[0].tolist()}")


def test_criterion_06_masked_identity(record):
    worst, where = 0.0, None
    for k, ch in enumerate(FIXTURES + RANDOM):
        err, _ = masked_identity_error(ch, synthesize(ch), n_max=50)
        if err > worst:
            worst, where = err, k
    record(6, worst <= 1e-10, f"worst relative error {worst:.2e} over "
                              f"{len(FIXTURES)} fixtures + {len(RANDOM)} random chains")


def test_criterion_07_monotone_j(record):
    bad = []
    for k, ch in enumerate(FIXTURES + RANDOM):
        rep = check_invariants(ch, synthesize(ch))
        if rep.checks["monotone_j"].status != "pass":
            bad.append(k)
    record(7, not bad, f"violations in {len(bad)} of {len(FIXTURES) + len(RANDOM)} chains")


def test_criterion_08_simplex(record):
    ch = two_leaders()
    cert = synthesize(ch)
    simplex = qsd_simplex(cert)
    nu = cert.on(4)[0]
    worst = 0.0
    for w in np.linspace(0, 1, 11):
        mix = np.zeros(4)
        mix[cert.support] = simplex.combination([w, 1 - w])
        worst = max(worst, np.abs(step_measure(ch, mix) - cert.theta_bar * mix).sum())
    extremes = max(np.abs(step_measure(ch, v) - cert.theta_bar * v).sum() for v in nu)
    ok = simplex.dimension == 2 and extremes <= 1e-10 and worst <= 1e-10
    record(8, ok, f"dimension={simplex.dimension} extreme residual={extremes:.1e} "
                  f"worst combination residual={worst:.1e}")


def test_criterion_09_operator_lab(record):
    worst_err, worst_id, jbad = 0.0, 0.0, 0
    for case in (1, 2, 3):
        for i in range(100):
            a, Q, b = random_instance(case, seed=0, instance=i)
            comp = COMPOSE[case](a, Q, b)
            worst_err = max(worst_err, comp.error)
            ids = comp.fitted.identity_residuals()
            worst_id = max(worst_id, ids["ME-E"], ids["EM-E"])
            if case == 3 and comp.fitted.J != 1 + b.J:
                jbad += 1
            elif not comp.j_match:
                jbad += 1
    ok = worst_err <= 1e-6 and worst_id <= 1e-10 and jbad == 0
    record(9, ok, f"max |E_pred - E_fit|={worst_err:.1e} max identity residual="
                  f"{worst_id:.1e} exponent mismatches={jbad}")


def test_criterion_10_rate_shapes(record):
    ca = chain_A()
    la = check_limit(ca, synthesize(ca), x=1, n_max=400)
    nres = la.n * la.residual
    bounded = np.max(nres) <= 1 + 1e-9
    converges = np.ptp(nres[len(nres) // 2:]) <= 1e-9
    cb = chain_B()
    certb = synthesize(cb)
    lb = check_limit(cb, certb, x=1, n_max=400)
    expect = certb.envelope.ratio
    ok = (bounded and converges and lb.passed and lb.measured_ratio is not None
          and abs(lb.measured_ratio - expect) <= 0.05)
    record(10, ok, f"chain A n*res in [{nres.min():.6f}, {nres.max():.6f}]; chain B "
                   f"ratio {lb.measured_ratio:.6f} vs max(gap, gamma/theta)={expect:.6f}")


def test_criterion_11_lyapunov(record):
    rules = parse_rules(DOWNWARD_DRIFT)
    lyap = lyapunov_check(rules, "pow(1.5, x)", 200, 400)
    stab = qsd_stability(rules, "pow(1.5, x)", [200, 400])
    dist = stab.nu_distance[-1]
    drift = stab.theta_drift[-1]
    ok = lyap.passed and dist <= 1e-8 and drift <= 1e-10
    record(11, ok, f"lyapunov_check {'pass' if lyap.passed else 'fail'} "
                   f"(tail ratio {lyap.tail_sup:.6f} vs theta {lyap.theta_ref:.6f}); "
                   f"nu V-TV {dist:.1e}; theta drift {drift:.1e}")


def test_criterion_12_monte_carlo(record):
    ch = chain_A()
    mu = np.array([0.0, 1.0])
    exact = conditional_law(ch, mu, 20).law
    mc = monte_carlo_conditional(ch, 1, 20, 10**6, seed=0)
    ok, z = mc.agrees_with(exact, k=3.0)
    record(12, ok, f"survivors={mc.survivors} empirical={mc.law.tolist()} "
                   f"exact={exact.tolist()} |z|={np.round(z, 3).tolist()}")


if __name__ == "__main__":
    import sys

    failures = 0

    def _record(number, ok, detail=""):
        global failures
        print(f"criterion {number:>2}: {'PASS' if ok else 'FAIL'}  {detail}")
        failures += not ok

    for name, fn in sorted(globals().copy().items()):
        if name.startswith("test_criterion_"):
            fn(_record)
    sys.exit(1 if failures else 0)
