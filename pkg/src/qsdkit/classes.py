"""Communication classes, accessibility order and leading-class strata.

Classes are numbered by their smallest state, so the output is independent
of the order in which the SCC solver happens to visit the graph.  The order
is stored as a boolean reachability matrix ``reach`` with
``reach[j, i] = True`` when class ``i`` is accessible from class ``j``
(``i`` precedes ``j``), ``i != j``.
"""

from dataclasses import dataclass, field, replace
import warnings

import numpy as np
from scipy.sparse.csgraph import connected_components

from .errors import QsdError

THETA_TOL = 1e-9
# band (in units of THETA_TOL) inside which a near tie is reported as fragile
FRAGILE_BAND = 1e3


@dataclass(frozen=True)
class ClassGraph:
    classes: tuple
    class_of: np.ndarray
    successors: tuple
    reach: np.ndarray
    self_loop: np.ndarray
    theta: np.ndarray = None
    theta_bar: float = None
    fbar: tuple = ()
    fbar_levels: tuple = ()
    jbar_levels: tuple = ()
    remainder: tuple = ()
    j_class: np.ndarray = None
    warnings: tuple = field(default=(), compare=False)

    @property
    def k(self):
        return len(self.classes)

    @property
    def edges(self):
        """Pairs ``(j, i)`` with ``i`` accessible from ``j``."""
        jj, ii = np.nonzero(self.reach)
        return {(int(a), int(b)) for a, b in zip(jj, ii)}

    def precedes(self, i, j):
        """True when ``i`` is accessible from ``j`` and ``i != j``."""
        return bool(self.reach[j, i])

    def succeq(self, j, i):
        return i == j or bool(self.reach[j, i])

    @property
    def lbar(self):
        return len(self.fbar_levels) - 1

    def states_of(self, class_ids):
        if len(class_ids) == 0:
            return np.zeros(0, dtype=int)
        return np.sort(np.concatenate([self.classes[c] for c in class_ids]))

    def topological_order(self):
        """Classes ordered so that every class comes after its successors."""
        order, seen = [], np.zeros(self.k, dtype=bool)

        def visit(c):
            stack = [(c, iter(self.successors[c]))]
            seen[c] = True
            while stack:
                node, it = stack[-1]
                nxt = next(it, None)
                if nxt is None:
                    stack.pop()
                    order.append(node)
                elif not seen[nxt]:
                    seen[nxt] = True
                    stack.append((nxt, iter(self.successors[nxt])))

        for c in range(self.k):
            if not seen[c]:
                visit(c)
        return order

    def components(self):
        """Connected components of the undirected class graph."""
        adj = self.reach | self.reach.T
        n, labels = connected_components(adj, directed=False)
        return [np.flatnonzero(labels == c).tolist() for c in range(n)]

    def j_state(self):
        return self.j_class[self.class_of]

    def as_dict(self):
        out = {
            "classes": [c.tolist() for c in self.classes],
            "edges": sorted([list(e) for e in self.edges]),
        }
        if self.theta is not None:
            out.update({
                "theta": self.theta.tolist(),
                "theta_bar": self.theta_bar,
                "fbar": list(self.fbar),
                "fbar_levels": [list(v) for v in self.fbar_levels],
                "jbar_levels": [list(v) for v in self.jbar_levels],
                "remainder": list(self.remainder),
            })
        if self.j_class is not None:
            out["j_class"] = self.j_class.tolist()
        out["warnings"] = list(self.warnings)
        return out


def find_classes(chain):
    """Strongly connected components of the support graph and their order.

    Returns a partial :class:`ClassGraph` (no theta / strata yet).
    """
    m = chain.matrix.copy()
    m.data = (m.data > 0).astype(float)
    m.eliminate_zeros()
    _, labels = connected_components(m, directed=True, connection="strong")
    # renumber by smallest member state
    first = {}
    for x, lab in enumerate(labels.tolist()):
        first.setdefault(lab, len(first))
    class_of = np.array([first[lab] for lab in labels.tolist()], dtype=int)
    k = len(first)
    classes = tuple(np.flatnonzero(class_of == c) for c in range(k))

    coo = m.tocoo()
    a, b = class_of[coo.row], class_of[coo.col]
    self_loop = np.zeros(chain.d, dtype=bool)
    self_loop[coo.row[coo.row == coo.col]] = True
    direct = np.zeros((k, k), dtype=bool)
    direct[a, b] = True
    np.fill_diagonal(direct, False)
    successors = tuple(tuple(np.flatnonzero(direct[c]).tolist()) for c in range(k))

    g = ClassGraph(classes=classes, class_of=class_of, successors=successors,
                   reach=np.zeros((k, k), dtype=bool), self_loop=self_loop)
    reach = np.zeros((k, k), dtype=bool)
    for c in g.topological_order():
        for s in successors[c]:
            reach[c, s] = True
            reach[c] |= reach[s]
    if np.any(np.diag(reach)):
        raise QsdError("internal error: cycle in condensation graph")
    return replace(g, reach=reach)


def stratify(graph, theta, theta_bar=None, tol=THETA_TOL):
    """Attach per-class rates and compute the leading strata.

    Parameters
    ----------
    graph : ClassGraph
        Output of :func:`find_classes`.
    theta : array_like
        Spectral radius of each class block.
    theta_bar : float, optional
        Maximal rate; defaults to ``max(theta)``.
    tol : float
        Relative tolerance for deciding ``theta_i == theta_bar``.

    Returns
    -------
    ClassGraph
        With ``fbar``, ``fbar_levels`` (minimal layers of the leading set),
        ``jbar_levels`` (index ``l`` holds the classes at level ``l``),
        ``remainder`` (classes that cannot reach the leading set) and
        ``j_class`` filled in.
    """
    theta = np.asarray(theta, dtype=float)
    if theta.shape != (graph.k,):
        raise ValueError("one theta per class required")
    if theta_bar is None:
        theta_bar = float(theta.max())
    cut = theta_bar * (1 - tol)
    fbar = tuple(int(c) for c in np.flatnonzero(theta >= cut))
    notes = []
    near = np.flatnonzero((theta < cut) & (theta >= theta_bar * (1 - FRAGILE_BAND * tol)))
    if near.size:
        notes.append("fragile stratification: classes %s have rates within %.0e "
                     "of theta_bar but outside the tie tolerance"
                     % (near.tolist(), FRAGILE_BAND * tol))
        warnings.warn(notes[-1])

    levels, left = [], set(fbar)
    while left:
        minimal = sorted(i for i in left
                         if not any(graph.reach[i, o] for o in left if o != i))
        levels.append(tuple(minimal))
        left -= set(minimal)

    jbar = [()] * len(levels)
    taken = set()
    for ell in range(len(levels) - 1, -1, -1):
        members = tuple(c for c in range(graph.k) if c not in taken
                        and any(graph.succeq(c, i) for i in levels[ell]))
        jbar[ell] = members
        taken |= set(members)
    remainder = tuple(c for c in range(graph.k) if c not in taken)

    g = replace(graph, theta=theta, theta_bar=theta_bar, fbar=fbar,
                fbar_levels=tuple(levels), jbar_levels=tuple(jbar),
                remainder=remainder, warnings=tuple(notes))
    return replace(g, j_class=polynomial_parameter(g))


def polynomial_parameter(graph):
    """Polynomial exponent of each class.

    For a class ``i0`` this is the maximum, over paths of the condensation
    DAG from ``i0`` to a leading class, of the number of leading classes met
    before the endpoint; 0 when no leading class is accessible.  Evaluated
    as a longest-path recursion in reverse topological order.
    """
    if graph.theta is None:
        raise ValueError("graph must be stratified first")
    in_f = np.zeros(graph.k, dtype=bool)
    in_f[list(graph.fbar)] = True
    best = np.full(graph.k, -np.inf)
    for c in graph.topological_order():
        below = max((best[s] for s in graph.successors[c]), default=-np.inf)
        if in_f[c]:
            best[c] = 1 + max(below, 0)
        else:
            best[c] = below
    j = np.where(best > 0, best - 1, 0)
    return j.astype(int)


def j_from_levels(graph):
    """Exponent read off the level sets (``l`` on each class of level ``l``).

    Classes outside every level get 0.  Used to cross-check
    :func:`polynomial_parameter`.
    """
    j = np.zeros(graph.k, dtype=int)
    for ell, members in enumerate(graph.jbar_levels):
        j[list(members)] = ell
    return j
