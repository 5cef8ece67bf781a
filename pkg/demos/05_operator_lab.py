"""Operator-level composition: predicted limits against fitted ones."""

import numpy as np

from qsdkit import compose_case3, fit_H
from qsdkit.operators import random_instance, run_batch

np.set_printoptions(precision=5, suppress=True)

# A Jordan block grows linearly; the limit of M^n / n is the nilpotent part
h = fit_H(np.array([[1.0, 1.0], [0.0, 1.0]]))
print("Jordan block: J =", h.J)
print(h.E)

# Two leading blocks glued together: exponent 0 + 1
P, Q, R = random_instance(3, seed=0, instance=0)
comp = compose_case3(P, Q, R)
print("case 3: predicted J", comp.predicted_J, "fitted J", comp.fitted.J,
      "| E_pred - E_fit | =", comp.error)

for case in (1, 2, 3):
    rows = run_batch(case, seed=0, instances=20)
    print(f"case {case}: worst error {max(r['error'] for r in rows):.1e} over {len(rows)} instances")

# A rotation has no polynomial limit and is refused
try:
    fit_H(np.array([[0.0, 1.0], [1.0, 0.0]]))
except Exception as exc:
    print("refused:", exc)
