"""Communication classes, the leading set and the polynomial exponent."""

import numpy as np

from qsdkit import find_classes, perron, stratify
from qsdkit.fixtures import chain_D, dag4

chain = dag4()
print(chain.dense())

graph = find_classes(chain)
theta = np.array([perron(chain, c).theta for c in graph.classes])
graph = stratify(graph, theta)

print("classes        ", [c.tolist() for c in graph.classes])
print("edges (i -> j) ", graph.edges)
print("rates          ", theta)
print("leading set    ", graph.fbar, "theta_bar =", graph.theta_bar)
print("minimal layers ", graph.fbar_levels)
print("level sets     ", graph.jbar_levels, "remainder", graph.remainder)
print("j per class    ", graph.j_class)

# Three tied classes in a line: every extra tie adds one to the exponent
g = find_classes(chain_D())
g = stratify(g, np.array([perron(chain_D(), c).theta for c in g.classes]))
print("chain D: j =", g.j_state())
