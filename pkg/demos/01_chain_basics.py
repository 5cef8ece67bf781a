"""Absorbed chains: building, validating and pushing measures forward."""

import numpy as np

from qsdkit import AbsorbedChain, iterate, step_function, step_measure, validate

# Two states, each killed with probability 1/2 or 1/5 per step.
# State 1 leaks into state 0.
chain = AbsorbedChain.from_dense([[0.5, 0.0],
                                  [0.3, 0.5]])
print(chain)

report = validate(chain)
print("valid:", report.ok)
print("one-step absorption:", report.absorption)

# Left action moves measures, right action moves functions
mu = np.array([0.0, 1.0])
print("mu S_1   =", step_measure(chain, mu))
print("S_1 1    =", step_function(chain, np.ones(2)))

# Rescaled survival from state 1 grows like 1 + 0.6 n
m = iterate(chain, np.ones(2), 10, theta=0.5, side="function")
for n in (1, 5, 10):
    print(f"n={n:2d}  0.5^-n P_1(n < tau) = {m[n, 1]:.6f}   1 + 0.6 n = {1 + 0.6 * n:.6f}")

# A row that sums past 1 is rejected, with the row named
bad = AbsorbedChain.from_dense([[0.5, 0.0], [0.8, 0.5]], check=False)
print(validate(bad).violations)
