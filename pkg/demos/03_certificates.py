"""Quasi-stationary certificates for the small fixture chains."""

import numpy as np

from qsdkit import qsd_simplex, synthesize
from qsdkit.chain import step_measure
from qsdkit.fixtures import chain_A, chain_B, chain_C, dag4, two_leaders

np.set_printoptions(precision=6, suppress=True)

for name, make in [("A", chain_A), ("B", chain_B), ("C", chain_C), ("dag4", dag4)]:
    ch = make()
    cert = synthesize(ch)
    nu, eta, j = cert.on(ch.d)
    print(f"chain {name}: theta_bar={cert.theta_bar}  j={j}  nu={nu}  eta={eta}")
    print("    envelope:", cert.envelope.as_dict())

# With two leading classes that cannot see each other there are two extreme
# QSDs, and every mixture is again a QSD.
ch = two_leaders()
cert = synthesize(ch)
simplex = qsd_simplex(cert)
print("dimension of the simplex:", simplex.dimension)
for w in (0.0, 0.25, 1.0):
    mix = simplex.combination([w, 1 - w])
    res = np.abs(step_measure(ch, mix) - cert.theta_bar * mix).sum()
    print(f"  w={w:4.2f}  |mix S - theta mix| = {res:.1e}")

# Asking for slower families as well
ch = dag4()
tree = qsd_simplex(synthesize(ch), ch, recursive=True)
print("dag4: rate", tree.theta, "then", [c.theta for c in tree.children])
