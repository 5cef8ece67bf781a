"""Perron data of irreducible class blocks."""

from dataclasses import dataclass, field
from math import gcd
import warnings

import numpy as np
import scipy.linalg as la
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .chain import AbsorbedChain, DENSE_LIMIT
from .errors import ConvergenceError

RESIDUAL_TOL = 1e-10
SLOW_TOL = 1e-6
POWER_TOL = 1e-14
POWER_MAXITER = 20_000


@dataclass(frozen=True)
class ClassSpectrum:
    """Perron triple of one class block.

    Attributes
    ----------
    states : ndarray
        Global state indices of the class, in increasing order.
    theta : float
        Perron root of the block.
    nu, eta : ndarray
        Left and right Perron vectors on ``states`` with ``sum(nu) == 1`` and
        ``nu @ eta == 1``.
    period : int
    gap : float
        Ratio of the second eigenvalue modulus to ``theta``; 0 for 1x1
        blocks, 1 for slow (near-unit ratio) classes.
    """

    states: np.ndarray
    theta: float
    nu: np.ndarray
    eta: np.ndarray
    period: int
    gap: float
    slow: bool = False
    dead: bool = False
    residual: float = 0.0
    warnings: tuple = field(default=(), compare=False)

    @property
    def periodic(self):
        return self.period > 1


def _block(chain, states):
    states = np.asarray(states, dtype=int)
    if isinstance(chain, AbsorbedChain):
        m = chain.matrix
    else:
        m = sp.csr_matrix(chain)
    return m[states][:, states]


def period(chain, states):
    """Period of an irreducible class (gcd of its cycle lengths).

    A singleton without self-loop counts as aperiodic.
    """
    states = np.asarray(states, dtype=int)
    if states.size == 1:
        return 1
    b = _block(chain, states).tocsr()
    b.eliminate_zeros()
    level = np.full(states.size, -1)
    level[0] = 0
    frontier = [0]
    while frontier:
        nxt = []
        for u in frontier:
            for v in b.indices[b.indptr[u]:b.indptr[u + 1]]:
                if level[v] < 0:
                    level[v] = level[u] + 1
                    nxt.append(v)
        frontier = nxt
    g = 0
    coo = b.tocoo()
    for u, v in zip(coo.row.tolist(), coo.col.tolist()):
        g = gcd(g, abs(int(level[u]) + 1 - int(level[v])))
    return max(g, 1)


def perron(chain, states):
    """Perron triple, period and spectral gap of the block on ``states``.

    Blocks of at most 64 states use a dense eigen-decomposition; larger ones
    use nonnegative power iteration, which keeps every entry of the Perron
    vectors to relative accuracy even when they span many decades.

    Raises
    ------
    ConvergenceError
        If the eigen-residuals exceed ``1e-10`` relative.
    """
    states = np.asarray(states, dtype=int)
    b = _block(chain, states)
    notes = []
    if states.size == 1:
        theta = float(b[0, 0]) if b.nnz else 0.0
        dead = theta == 0.0
        if dead:
            notes.append(f"state {int(states[0])} cannot return to itself; rate 0")
        return ClassSpectrum(states, theta, np.ones(1), np.ones(1), 1, 0.0,
                             dead=dead, warnings=tuple(notes))
    per = period(chain, states)
    if states.size <= DENSE_LIMIT:
        theta, nu, eta, gap = _dense_perron(b.toarray())
    else:
        try:
            theta, nu, eta, gap = _power_perron(b.tocsr(), per)
        except ConvergenceError:
            notes.append("power iteration stalled; used shifted inverse iteration")
            theta, nu, eta, gap = _inverse_perron(b.tocsr())
    slow = gap >= 1 - SLOW_TOL
    if slow:
        gap = 1.0
    if per > 1:
        notes.append(f"class with states {states[:5].tolist()}... has period {per}")
        warnings.warn(notes[-1])
    scale = max(theta, 1e-300)
    bd = b.tocsr()
    res_nu = np.abs(bd.T @ nu - theta * nu).sum() / scale
    res_eta = np.abs(bd @ eta - theta * eta).max() / (scale * np.abs(eta).max())
    residual = float(max(res_nu, res_eta))
    if residual > RESIDUAL_TOL:
        raise ConvergenceError(
            f"Perron residual {residual:.3g} exceeds {RESIDUAL_TOL}", residual)
    return ClassSpectrum(states, theta, nu, eta, per, float(gap), slow=slow,
                         residual=residual, warnings=tuple(notes))


def _normalize(theta, nu, eta):
    nu = np.abs(nu)
    eta = np.abs(eta)
    nu = nu / nu.sum()
    eta = eta / (nu @ eta)
    return float(theta), nu, eta


def _dense_perron(a):
    w, vl, vr = la.eig(a, left=True, right=True)
    k = int(np.argmax(w.real))
    theta = float(w[k].real)
    theta, nu, eta = _normalize(theta, vl[:, k].real, vr[:, k].real)
    mods = np.sort(np.abs(w))[::-1]
    gap = mods[1] / theta if theta > 0 and mods.size > 1 else 0.0
    return theta, nu, eta, float(min(gap, 1.0))


def _power_vector(op, start, maxiter):
    v = start / start.sum()
    lam = 0.0
    for it in range(maxiter):
        w = op(v)
        lam = w.sum()
        w = w / lam
        if np.abs(w - v).sum() <= POWER_TOL:
            return lam, w
        v = w
    raise ConvergenceError("power iteration did not converge",
                           float(np.abs(w - v).sum()))


def _power_perron(b, per, maxiter=POWER_MAXITER):
    d = b.shape[0]
    # a diagonal shift removes periodicity without moving the Perron vectors
    shift = float(np.asarray(b.sum(axis=1)).mean()) if per > 1 else 0.0
    bt = b.T.tocsr()
    start = np.zeros(d)
    start[0] = 1.0
    lam, nu = _power_vector(lambda v: bt @ v + shift * v, start, maxiter)
    lam_r, eta = _power_vector(lambda f: b @ f + shift * f, np.ones(d), maxiter)
    theta = lam - shift
    theta, nu, eta = _normalize(theta, nu, eta)
    gap = _deflated_ratio(b, theta, nu, eta)
    return theta, nu, eta, gap


def _inverse_perron(b):
    theta = _bisect_root(b)
    eta = _inverse_vector(b, theta)
    nu = _inverse_vector(b.T.tocsr(), theta)
    theta, nu, eta = _normalize(theta, nu, eta)
    return theta, nu, eta, _deflated_ratio(b, theta, nu, eta)


def _is_m_matrix(a, sigma):
    # sigma - A (a Z-matrix) is a nonsingular M-matrix iff elimination
    # without pivoting meets only positive pivots
    d = a.shape[0]
    try:
        lu = spla.splu((sigma * sp.identity(d, format="csc") - a).tocsc(),
                       permc_spec="NATURAL", diag_pivot_thresh=0.0,
                       options={"SymmetricMode": True})
    except RuntimeError:
        return False
    if np.any(lu.perm_r != np.arange(d)):
        return False
    return bool(np.all(lu.U.diagonal() > 0))


def _bisect_root(a, rel=1e-15):
    """Perron root of an irreducible nonnegative matrix by bisection."""
    lo = float(a.diagonal().max())
    hi = float(np.asarray(a.sum(axis=1)).max())
    while hi - lo > rel * hi:
        mid = 0.5 * (lo + hi)
        if mid in (lo, hi):
            break
        if _is_m_matrix(a, mid):
            hi = mid
        else:
            lo = mid
    return hi


def _inverse_vector(a, theta, maxiter=50):
    # sigma just above the root keeps (sigma - A)^-1 entrywise nonnegative
    d = a.shape[0]
    sigma = theta * (1 + 1e-12)
    lu = spla.splu((sigma * sp.identity(d, format="csc") - a).tocsc())
    v = np.ones(d) / d
    for _ in range(maxiter):
        w = np.abs(lu.solve(v))
        w /= w.sum()
        if np.abs(w - v).sum() <= POWER_TOL:
            return w
        v = w
    return v


def _deflated_ratio(b, theta, nu, eta, steps=3000, seed=0):
    if theta <= 0:
        return 0.0
    rng = np.random.Generator(np.random.Philox(seed))
    v = rng.random(b.shape[0])
    bt = b.T.tocsr()
    logs = []
    for _ in range(steps):
        v = bt @ v
        v = v - (v @ eta) * nu
        n = np.abs(v).sum()
        if n == 0:
            return 0.0
        logs.append(np.log(n))
        v = v / n
    half = steps // 2
    rate = np.exp(np.sum(logs[half:]) / (steps - half))
    return float(min(rate / theta, 1.0))


def spectral_radius(chain, states=None):
    """Spectral radius of the (possibly reducible) block on ``states``.

    Computed as the largest Perron root over the block's classes.
    """
    from .classes import find_classes

    if states is None:
        sub = chain
    else:
        states = np.asarray(states, dtype=int)
        if states.size == 0:
            return 0.0
        sub = chain.restrict(states)
    graph = find_classes(sub)
    return max(perron(sub, c).theta for c in graph.classes)
