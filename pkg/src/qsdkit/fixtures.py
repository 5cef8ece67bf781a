"""Small named chains and seeded random generators used by tests and demos.

State numbering is 0-based.  The closed forms quoted below are what the
test-suite checks against.
"""

import numpy as np

from .chain import AbsorbedChain


def chain_A():
    """Two classes with equal rate 1/2; state 1 feeds state 0.

    ``theta_bar = 0.5``, ``j = (0, 1)``, ``eta = (1, 0.6)``, ``nu = delta_0``.
    """
    return AbsorbedChain.from_dense([[0.5, 0.0], [0.3, 0.5]])


def chain_B():
    """Leading state 0 fed by nothing; state 1 drains into it at a slower rate.

    ``nu = (0.6, 0.4)``, ``eta = (5/3, 0)``; envelope ratio 0.4.
    """
    return AbsorbedChain.from_dense([[0.5, 0.2], [0.0, 0.2]])


def chain_C():
    """Faster state 0 attached above the leading state 1: ``eta = (5/3, 1)``."""
    return AbsorbedChain.from_dense([[0.2, 0.5], [0.0, 0.5]])


def chain_D():
    """Three tied classes in a line: ``j = (0, 1, 2)``, ``eta = (1, .5, .125)``."""
    return AbsorbedChain.from_dense([[0.5, 0.0, 0.0],
                                     [0.25, 0.5, 0.0],
                                     [0.0, 0.25, 0.5]])


def dag4():
    """Four singleton classes; two leaders stacked above a slower one.

    ``j = (0, 0, 0, 1)``; the single weight function is positive on states
    0, 2, 3 and vanishes on state 1.
    """
    p = np.diag([0.5, 0.3, 0.3, 0.5])
    p[2, 0] = 0.2
    p[3, 1] = 0.2
    p[3, 2] = 0.2
    return AbsorbedChain.from_dense(p)


def two_leaders():
    """Two mutually inaccessible 2-state classes, both with rate 1/2."""
    p = np.zeros((4, 4))
    p[:2, :2] = [[0.3, 0.2], [0.2, 0.3]]
    p[2:, 2:] = [[0.4, 0.1], [0.1, 0.4]]
    return AbsorbedChain.from_dense(p)


def two_leaders_fed():
    """:func:`two_leaders` plus a slower state 4 that feeds both classes."""
    p = np.zeros((5, 5))
    p[:4, :4] = two_leaders().dense()
    p[4, 4] = 0.2
    p[4, 0] = 0.1
    p[4, 2] = 0.1
    return AbsorbedChain.from_dense(p)


def periodic_leader():
    """A 2-cycle with rate 0.9 feeding an aperiodic state with rate 0.5."""
    return AbsorbedChain.from_dense([[0.5, 0.0, 0.0],
                                     [0.05, 0.0, 0.9],
                                     [0.05, 0.9, 0.0]])


NAMED = {
    "A": chain_A,
    "B": chain_B,
    "C": chain_C,
    "D": chain_D,
    "dag4": dag4,
    "two_leaders": two_leaders,
    "two_leaders_fed": two_leaders_fed,
}


# ------------------------------------------------------------------ random

def _irreducible_block(rng, n, mass):
    if n == 1:
        return np.array([[mass * rng.uniform(0.3, 1.0)]])
    b = np.zeros((n, n))
    perm = rng.permutation(n)
    b[perm, np.roll(perm, -1)] = rng.uniform(0.2, 1.0, n)    # a Hamiltonian cycle
    extra = rng.random((n, n)) < 0.3
    b[extra] += rng.uniform(0.0, 1.0, extra.sum())
    np.fill_diagonal(b, b.diagonal() + rng.uniform(0.0, 0.5, n))  # aperiodic
    return b / b.sum(axis=1, keepdims=True) * mass * rng.uniform(0.6, 1.0, (n, 1))


def random_reducible(seed, instance=0, max_states=30):
    """Seeded reducible chain with 2 to 5 classes and at most 30 states.

    Blocks are irreducible and aperiodic; about a third of them reuse an
    earlier block verbatim, so tied rates are exact.  Cross mass only flows
    from later classes to earlier ones, and the state labels are shuffled.
    Returns ``(chain, sizes)``.
    """
    rng = np.random.Generator(np.random.Philox(np.random.SeedSequence([seed, instance])))
    k = int(rng.integers(2, 6))
    blocks = []
    for c in range(k):
        if blocks and rng.random() < 0.35:
            blocks.append(blocks[int(rng.integers(len(blocks)))].copy())
        else:
            cap = max(1, (max_states - sum(b.shape[0] for b in blocks)) // (k - c))
            n = int(rng.integers(1, min(cap, 8) + 1))
            blocks.append(_irreducible_block(rng, n, rng.uniform(0.5, 0.75)))
    sizes = [b.shape[0] for b in blocks]
    while sum(sizes) > max_states:
        blocks.pop()
        sizes.pop()
    d = sum(sizes)
    offs = np.concatenate([[0], np.cumsum(sizes)])
    p = np.zeros((d, d))
    for c, b in enumerate(blocks):
        p[offs[c]:offs[c + 1], offs[c]:offs[c + 1]] = b
        for a in range(c):
            if rng.random() < 0.5:
                src = offs[c] + rng.integers(sizes[c], size=2)
                dst = offs[a] + rng.integers(sizes[a], size=2)
                p[src, dst] += rng.uniform(0.01, 0.1, 2)
    perm = rng.permutation(d)
    q = np.empty_like(p)
    q[np.ix_(perm, perm)] = p
    return AbsorbedChain.from_dense(q), sizes


def random_chains(seed=0, count=50, max_states=30):
    return [random_reducible(seed, i, max_states)[0] for i in range(count)]


# ------------------------------------------------------------------- rules

DOWNWARD_DRIFT = """\
# up 0.2, down 0.7 (x >= 1); at 0 stay with probability 0.4
to = x+1 ; p = 0.2
to = max(x-1, 0) ; p = 0.7*min(x, 1)
to = x ; p = 0.4*(1 - min(x, 1))
V = pow(1.5, x)
"""

UPWARD_DRIFT = """\
# mass escapes upward; no Lyapunov control
to = x+1 ; p = 0.7
to = max(x-1, 0) ; p = 0.2*min(x, 1)
to = x ; p = 0.2*(1 - min(x, 1))
V = pow(1.1, x)
"""

# Even states form lane A, odd states lane B.  Both lanes carry the downward
# drift kernel; lane B also leaks 0.05 into lane A, so the two lanes tie.
TWO_LANE = """\
to = x+2 ; p = 0.2
to = max(x-2, 0) ; p = 0.7*min(max(x-1, 0), 1)
to = x ; p = 0.4*(1 - min(max(x-1, 0), 1))
to = max(x-1, 0) ; p = 0.05*(1 - pow(-1, x))/2
V = pow(1.2, x)
"""

# deterministic descent: every finite window is acyclic
DOWN_CHAIN = """\
to = max(x-1, 0) ; p = min(x, 1)
"""
