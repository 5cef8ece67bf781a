"""Checking a certificate against brute-force iteration and simulation."""

import numpy as np

from qsdkit import (check_limit, check_invariants, conditional_law, estimate_j,
                    monte_carlo_conditional, synthesize)
from qsdkit.fixtures import chain_A, chain_B, chain_D

ch = chain_D()
cert = synthesize(ch)
for x in range(3):
    e = estimate_j(ch, x, cert.theta_bar, n_max=4000)
    print(f"state {x}: certified j={cert.j_state[x]}  estimate {e.unrounded:.4f}")

rep = check_invariants(ch, cert)
for name, chk in rep.checks.items():
    print(f"  {name:18s} {chk.status:5s} {chk.detail}")

# Chain A converges like 1/n, chain B geometrically with ratio 0.4
la = check_limit(chain_A(), synthesize(chain_A()), x=1, n_max=400)
print("chain A: n * residual at n=10, 100, 400:", (la.n * la.residual)[[9, 99, 399]])
lb = check_limit(chain_B(), synthesize(chain_B()), x=1, n_max=100)
print("chain B: measured ratio", lb.measured_ratio)

# Simulation: 10^6 walkers from state 1 of chain A, 20 steps
exact = conditional_law(chain_A(), np.array([0.0, 1.0]), 20).law
mc = monte_carlo_conditional(chain_A(), 1, 20, 10**6, seed=0)
ok, z = mc.agrees_with(exact)
print(f"survivors {mc.survivors}: empirical {mc.law}  exact {exact}  within 3 SE: {ok}")
