"""Chains on the integers: rule files, truncation and the drift criterion."""

import numpy as np

from qsdkit import lyapunov_check, parse_rules, qsd_stability
from qsdkit.fixtures import DOWNWARD_DRIFT, TWO_LANE, UPWARD_DRIFT

rules = parse_rules(DOWNWARD_DRIFT)
print(DOWNWARD_DRIFT)

# With V = 1.5^x the drift ratio is 0.2*1.5 + 0.7/1.5 = 0.7667, just above the
# leading rate 0.75, so the criterion is not met.
rep = lyapunov_check(rules, "pow(1.5, x)", 200, 400)
print("V = 1.5^x:", rep.as_dict()["status"], f"ratio {rep.tail_sup:.4f} vs {rep.theta_ref:.4f}")

# Any base c with 0.2 c + 0.7 / c < 0.75 works; c = 1.8 gives 0.7489.
rep = lyapunov_check(rules, "pow(1.8, x)", 200, 400)
print("V = 1.8^x:", rep.as_dict()["status"], f"ratio {rep.tail_sup:.4f}")

# The truncated QSDs settle down regardless; the limit is nu(x) = 2^-(x+1)
stab = qsd_stability(rules, "pow(1.5, x)", [100, 200, 400])
print("stability:", stab.as_dict()["status"], "distances", stab.nu_distance)
nu = stab.certificates[-1].on(400)[0][0]
print("nu[:5] =", nu[:5], " 2^-(x+1) =", 0.5 ** np.arange(1, 6))

# Two tied lanes: lane B (odd states) feeds lane A and picks up j = 1
two = qsd_stability(parse_rules(TWO_LANE), None, [200, 400, 800])
j = two.certificates[-1].on(800)[2]
print("two lanes:", two.as_dict()["status"], "j on lane A", set(j[0::2]), "on lane B", set(j[1::2]))

# Upward drift: mass runs to the boundary and nothing converges
up = qsd_stability(parse_rules(UPWARD_DRIFT), None, [50, 100, 200])
print("upward drift:", up.as_dict()["status"], up.diagnostics)
