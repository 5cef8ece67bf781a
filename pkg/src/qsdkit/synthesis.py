"""Quasi-stationary structure of reducible absorbed chains.

Certificates live on an explicit set of global states (``support``); all
vectors in a certificate are indexed by position in ``support``.  The three
two-block compositions glue a certificate on ``D1`` and/or one on ``D2``
into a certificate on ``D1 | D2`` for a chain with no transition from
``D2`` back to ``D1``:

* ``A1``: the leading behaviour sits in ``D1`` and ``D2`` decays faster;
* ``A2``: the leading behaviour sits in ``D2`` and ``D1`` decays faster;
* ``A3``: both blocks share the same rate; the exponent on ``D1`` jumps by one.

:func:`synthesize` runs the full induction over the condensation DAG.
"""

from dataclasses import dataclass, field, replace

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import spsolve

from .chain import DENSE_LIMIT
from .classes import THETA_TOL, find_classes, stratify
from .errors import HypothesisError, QsdError
from .spectral import perron, spectral_radius

GAMMA_EPS = 1e-12
SERIES_TOL = 1e-14
SERIES_CAP = 10**6


# ---------------------------------------------------------------- envelopes

@dataclass(frozen=True)
class Envelope:
    """Shape of the convergence envelope ``alpha_n``.

    ``kind`` is ``"geometric"`` (``alpha_n = C ratio^n``) or ``"polynomial"``
    (``alpha_n = C / n``).  ``constant`` stays ``None`` until fitted by the
    oracle: the existence constants are not computable in closed form.
    """

    kind: str
    ratio: float = 0.0
    j0: int = 0
    constant: float = None

    def alpha(self, n, constant=None):
        n = np.asarray(n, dtype=float)
        c = constant if constant is not None else (self.constant or 1.0)
        if self.kind == "geometric":
            out = c * self.ratio ** n
        else:
            out = c / np.maximum(n, 1.0)
        return np.where(n == 0, 1.0, out)

    def as_dict(self):
        return {"kind": self.kind, "ratio": self.ratio, "j0": self.j0,
                "constant": self.constant,
                "constant_status": "unset" if self.constant is None else "fitted"}


def rate_envelope(case, env_P=None, env_R=None, gamma_ratio=0.0, j0=0):
    """Envelope shape produced by a two-block composition.

    Parameters
    ----------
    case : {"A1", "A2", "A3", "base"}
    env_P, env_R : Envelope
        Envelopes of the blocks that carry the leading rate.
    gamma_ratio : float
        ``gamma / theta_bar`` for the faster-decaying block.
    j0 : int
        Maximal polynomial exponent of the composed certificate.
    """
    if case == "base":
        return Envelope("geometric", float(gamma_ratio), 0)
    lead = env_P if case == "A1" else env_R
    if case in ("A1", "A2") and j0 == 0 and lead.kind == "geometric":
        return Envelope("geometric", float(max(lead.ratio, gamma_ratio)), 0)
    return Envelope("polynomial", 0.0, int(j0))


def alpha_case_A1(alpha_P, gamma_ratio, j0P):
    """Envelope of the A1 composition with unit constant.

    ``alpha_P[k]`` samples the envelope of the leading block for
    ``k = 0..n_max`` (with ``alpha_P[0] = 1``).
    """
    alpha_P = np.asarray(alpha_P, dtype=float)
    out = np.empty_like(alpha_P)
    for n in range(alpha_P.size):
        k = np.arange(n + 1)
        frac = k / n if n else np.zeros(1)
        out[n] = np.sum(gamma_ratio ** k * ((1 + j0P) * alpha_P[n - k] + j0P * frac))
    return out


def alpha_case_A2(alpha_R, gamma_ratio, j0R):
    alpha_R = np.asarray(alpha_R, dtype=float)
    out = np.empty_like(alpha_R)
    for n in range(alpha_R.size):
        k = np.arange(n + 1)
        frac = k / n if n else np.zeros(1)
        out[n] = np.sum((alpha_R[n - k] + j0R * frac) * gamma_ratio ** k)
    return out


def alpha_case_A3(alpha_P, alpha_R, lstar):
    alpha_P = np.asarray(alpha_P, dtype=float)
    alpha_R = np.asarray(alpha_R, dtype=float)
    out = np.empty_like(alpha_P)
    out[0] = 1.0
    for n in range(1, alpha_P.size):
        k = np.arange(n + 1)
        out[n] = (lstar + np.sum(alpha_P[k] + alpha_R[k] * (k / n) ** lstar)) / n
    return out


# -------------------------------------------------------------- certificate

@dataclass(frozen=True)
class QsdCertificate:
    """Quasi-stationary structure of a chain on ``support``.

    Attributes
    ----------
    support : ndarray
        Global state indices covered, increasing.
    theta_bar : float
    j_state : ndarray of int
        Polynomial exponent per state (an upper bound when ``optimal`` is
        False, with ``j_lower`` the matching lower bound).
    index_set : tuple
        Labels of the extreme QSDs (class ids of the minimal leading classes).
    nu, eta : ndarray, shape (len(index_set), len(support))
        Extreme QSDs and the matching weight functions.
    weight : ndarray
        The weight function ``W`` (constant 1 on finite spaces).
    envelope : Envelope
    """

    support: np.ndarray
    theta_bar: float
    j_state: np.ndarray
    index_set: tuple
    nu: np.ndarray
    eta: np.ndarray
    weight: np.ndarray
    envelope: Envelope
    j_lower: np.ndarray = None
    optimal: bool = True
    steps: tuple = field(default=(), compare=False)
    graph: object = field(default=None, compare=False, repr=False)
    spectra: tuple = field(default=(), compare=False, repr=False)

    @property
    def eta_S(self):
        return self.eta.sum(axis=0)

    @property
    def j0(self):
        return int(self.j_state.max(initial=0))

    def position(self, states):
        states = np.asarray(states, dtype=int)
        pos = np.searchsorted(self.support, states)
        if np.any(pos >= self.support.size) or np.any(self.support[np.minimum(pos, self.support.size - 1)] != states):
            raise ValueError("states outside the certificate support")
        return pos

    def on(self, d):
        """Vectors extended by 0 to a chain with ``d`` states."""
        nu = np.zeros((self.nu.shape[0], d))
        eta = np.zeros((self.eta.shape[0], d))
        nu[:, self.support] = self.nu
        eta[:, self.support] = self.eta
        j = np.zeros(d, dtype=int)
        j[self.support] = self.j_state
        return nu, eta, j

    def as_dict(self):
        out = {
            "theta_bar": self.theta_bar,
            "support": self.support.tolist(),
            "index_set": list(self.index_set),
            "j_state": self.j_state.tolist(),
            "nu": self.nu.tolist(),
            "eta": self.eta.tolist(),
            "weight": self.weight.tolist(),
            "envelope": self.envelope.as_dict(),
            "optimal": self.optimal,
            "steps": [dict(s) for s in self.steps],
        }
        if self.j_lower is not None:
            out["j_lower"] = self.j_lower.tolist()
        return out


def certificate_from_spectrum(spectrum, label, theta_bar=None):
    """Single-class certificate (exponent 0) from a Perron triple."""
    if spectrum.theta <= 0:
        raise HypothesisError("class has zero rate", "positive rate", label)
    n = spectrum.states.size
    return QsdCertificate(
        support=np.asarray(spectrum.states, dtype=int),
        theta_bar=float(spectrum.theta if theta_bar is None else theta_bar),
        j_state=np.zeros(n, dtype=int),
        index_set=(label,),
        nu=spectrum.nu[None, :].copy(),
        eta=spectrum.eta[None, :].copy(),
        weight=np.ones(n),
        envelope=Envelope("geometric", float(spectrum.gap), 0),
    )


def union_certificate(certs, theta_bar):
    """Block union of certificates on mutually inaccessible supports."""
    support = np.sort(np.concatenate([c.support for c in certs]))
    m = sum(len(c.index_set) for c in certs)
    nu = np.zeros((m, support.size))
    eta = np.zeros((m, support.size))
    j = np.zeros(support.size, dtype=int)
    row, labels, ratio = 0, [], 0.0
    for c in certs:
        pos = np.searchsorted(support, c.support)
        r = len(c.index_set)
        nu[row:row + r, pos] = c.nu
        eta[row:row + r, pos] = c.eta
        j[pos] = c.j_state
        labels.extend(c.index_set)
        ratio = max(ratio, c.envelope.ratio)
        row += r
    kind = "geometric" if all(c.envelope.kind == "geometric" for c in certs) else "polynomial"
    return QsdCertificate(support, float(theta_bar), j, tuple(labels), nu, eta,
                          np.ones(support.size),
                          Envelope(kind, ratio if kind == "geometric" else 0.0, int(j.max(initial=0))))


# ------------------------------------------------------------ decomposition

@dataclass(frozen=True)
class TwoBlockDecomposition:
    """Split of a chain into ``D1`` (upstream) and ``D2`` (downstream).

    ``P``, ``Q``, ``R`` are the blocks ``S[D1, D1]``, ``S[D1, D2]`` and
    ``S[D2, D2]`` as CSR matrices; transitions leaving ``D1 | D2`` are
    killed.  ``case``, ``gamma`` and ``lstar`` are filled in by the
    composition that consumes the decomposition.
    """

    d1: np.ndarray
    d2: np.ndarray
    P: sp.csr_matrix
    Q: sp.csr_matrix
    R: sp.csr_matrix
    case: str = None
    gamma: float = None
    lstar: int = None

    @classmethod
    def build(cls, chain, d1, d2):
        d1 = np.sort(np.asarray(d1, dtype=int))
        d2 = np.sort(np.asarray(d2, dtype=int))
        if np.intersect1d(d1, d2).size:
            raise ValueError("D1 and D2 must be disjoint")
        m = chain.matrix
        back = m[d2][:, d1]
        back.eliminate_zeros()
        if back.nnz:
            coo = back.tocoo()
            witness = [(int(d2[r]), int(d1[c]), float(v))
                       for r, c, v in zip(coo.row, coo.col, coo.data)]
            raise HypothesisError("transitions from D2 back to D1: %s" % witness[:5],
                                  "no return from D2 to D1", witness[0])
        return cls(d1, d2, m[d1][:, d1].tocsr(), m[d1][:, d2].tocsr(),
                   m[d2][:, d2].tocsr())

    @property
    def support(self):
        return np.sort(np.concatenate([self.d1, self.d2]))

    def as_dict(self):
        return {"case": self.case, "D1": self.d1.tolist(), "D2": self.d2.tolist(),
                "gamma": self.gamma, "lstar": self.lstar}


def _block_radius(block):
    if block.shape[0] == 0:
        return 0.0
    from .chain import AbsorbedChain
    return spectral_radius(AbsorbedChain(block, check=False))


def _solve(A, b):
    """Solve ``(I - A) x = b`` with a Neumann-series fallback."""
    n = A.shape[0]
    if n == 0:
        return np.zeros_like(b)
    if n <= DENSE_LIMIT:
        M = np.eye(n) - A.toarray()
        x = np.linalg.solve(M, b)
    else:
        M = (sp.identity(n, format="csc") - A.tocsc())
        x = spsolve(M, b)
        x = np.asarray(x).reshape(b.shape)
    res = b - (x - A @ x)
    if np.all(np.isfinite(x)) and np.abs(res).max(initial=0) <= 1e-12 * max(1.0, np.abs(b).max(initial=0)):
        return x
    # ill-conditioned: sum the series directly
    x = b.astype(float).copy()
    term = b.astype(float).copy()
    for _ in range(SERIES_CAP):
        term = A @ term
        x = x + term
        if np.abs(term).max(initial=0) <= SERIES_TOL * np.abs(x).max(initial=1):
            return x
    raise QsdError("Neumann series did not converge")


def _can_enter(dec, target):
    """States of D1 from which the chain can enter D2 inside ``target``."""
    qb = (dec.Q != 0).astype(float)
    pb = (dec.P != 0).astype(float)
    m = np.asarray(qb @ target.astype(float)).ravel() > 0
    while True:
        new = m | (np.asarray(pb @ m.astype(float)).ravel() > 0)
        if (new == m).all():
            return m
        m = new


# ------------------------------------------------------------- compositions

def _check_block_cert(cert, states, name):
    if not np.array_equal(np.sort(cert.support), np.sort(states)):
        raise ValueError(f"certificate for {name} does not cover exactly {name}")


def compose_case_A1(dec, cert_P, tol=THETA_TOL):
    """Leading rate on ``D1``; ``D2`` decays strictly faster.

    The tail ``sum_k theta^-k-1 (nu_P Q) R^k`` is obtained from one linear
    solve per extreme QSD.

    Raises
    ------
    HypothesisError
        If the spectral radius of ``R`` is not below ``theta_bar``.
    """
    _check_block_cert(cert_P, dec.d1, "D1")
    tb = cert_P.theta_bar
    rho = _block_radius(dec.R)
    if rho >= tb * (1 - tol):
        raise HypothesisError(
            f"case A1 inapplicable: spectral radius of R is {rho!r} >= theta_bar {tb!r}",
            "rho(R) < theta_bar", "D2")
    gamma = rho + GAMMA_EPS
    dec = replace(dec, case="A1", gamma=gamma)
    support = dec.support
    p1 = np.searchsorted(support, dec.d1)
    p2 = np.searchsorted(support, dec.d2)
    # cert vectors ordered like dec.d1 (both sorted)
    m = len(cert_P.index_set)
    nu = np.zeros((m, support.size))
    eta = np.zeros((m, support.size))
    Rt = (dec.R.T / tb).tocsr()
    for i in range(m):
        rhs = np.asarray(dec.Q.T @ cert_P.nu[i]).ravel() / tb
        tail = _solve(Rt, rhs)
        mass = 1.0 + tail.sum()
        nu[i, p1] = cert_P.nu[i] / mass
        nu[i, p2] = tail / mass
        eta[i, p1] = cert_P.eta[i] * mass
    j = np.zeros(support.size, dtype=int)
    j[p1] = cert_P.j_state
    env = rate_envelope("A1", env_P=cert_P.envelope, gamma_ratio=gamma / tb,
                        j0=int(j.max(initial=0)))
    j_lower = None
    if cert_P.j_lower is not None:
        j_lower = np.zeros(support.size, dtype=int)
        j_lower[p1] = cert_P.j_lower
    return QsdCertificate(support, tb, j, cert_P.index_set, nu, eta,
                          np.ones(support.size), env, j_lower=j_lower,
                          optimal=cert_P.optimal,
                          steps=cert_P.steps + (dec.as_dict(),))


def compose_case_A2(dec, cert_R, tol=THETA_TOL):
    """Leading rate on ``D2``; ``D1`` decays strictly faster.

    On ``D1`` the exponent is the largest level of ``D2`` that can be entered,
    and the weight function is the discounted weight collected at the entry
    point restricted to that level.
    """
    _check_block_cert(cert_R, dec.d2, "D2")
    tb = cert_R.theta_bar
    rho = _block_radius(dec.P)
    if rho >= tb * (1 - tol):
        raise HypothesisError(
            f"case A2 inapplicable: spectral radius of P is {rho!r} >= theta_bar {tb!r}",
            "rho(P) < theta_bar", "D1")
    gamma = rho + GAMMA_EPS
    dec = replace(dec, case="A2", gamma=gamma)
    support = dec.support
    p1 = np.searchsorted(support, dec.d1)
    p2 = np.searchsorted(support, dec.d2)
    jR = cert_R.j_state
    levels = np.unique(jR)
    jS1 = np.full(dec.d1.size, -1)
    for ell in levels:
        jS1[_can_enter(dec, jR == ell)] = ell
    entered = jS1 >= 0
    jS1 = np.where(entered, jS1, 0)

    m = len(cert_R.index_set)
    nu = np.zeros((m, support.size))
    eta = np.zeros((m, support.size))
    Pn = (dec.P / tb).tocsr()
    for i in range(m):
        nu[i, p2] = cert_R.nu[i]
        eta[i, p2] = cert_R.eta[i]
        e1 = np.zeros(dec.d1.size)
        for ell in levels:
            sel = entered & (jS1 == ell)
            if not sel.any():
                continue
            g = cert_R.eta[i] * (jR == ell)
            h = _solve(Pn, np.asarray(dec.Q @ g).ravel() / tb)
            e1[sel] = h[sel]
        eta[i, p1] = e1
    j = np.zeros(support.size, dtype=int)
    j[p1] = jS1
    j[p2] = jR
    env = rate_envelope("A2", env_R=cert_R.envelope, gamma_ratio=gamma / tb,
                        j0=int(j.max(initial=0)))
    j_lower = None
    if cert_R.j_lower is not None:
        j_lower = j.copy()
        j_lower[p2] = cert_R.j_lower
    return QsdCertificate(support, tb, j, cert_R.index_set, nu, eta,
                          np.ones(support.size), env, j_lower=j_lower,
                          optimal=cert_R.optimal,
                          steps=cert_R.steps + (dec.as_dict(),))


@dataclass(frozen=True)
class LStar:
    """Largest exponent of ``D2`` entered from ``D1``.

    ``per_state[x]`` is the same quantity from ``x`` alone (``-1`` when ``x``
    cannot enter ``D2``).  ``positive`` records, for each extreme QSD of
    ``D1``, whether it enters the top level at a state where the weight of
    ``D2`` is positive; it is ``None`` when no ``D1`` certificate is given.
    """

    value: int
    per_state: np.ndarray
    vacuous: bool
    positive: tuple = None

    @property
    def certified(self):
        return self.positive is not None and all(self.positive)


def lstar(dec, cert_R, cert_P=None):
    _check_block_cert(cert_R, dec.d2, "D2")
    jR = cert_R.j_state
    per = np.full(dec.d1.size, -1)
    for ell in np.unique(jR):
        per[_can_enter(dec, jR == ell)] = ell
    vacuous = bool((per < 0).all())
    value = int(per.max(initial=-1)) if not vacuous else 0
    positive = None
    if cert_P is not None:
        good = _can_enter(dec, (jR == value) & (cert_R.eta_S > 0))
        positive = tuple(bool(np.any(good & (nu_k > 0))) for nu_k in cert_P.nu)
        if vacuous:
            positive = tuple(False for _ in positive)
    return LStar(value, per, vacuous, positive)


def compose_case_A3(dec, cert_P, cert_R, tol=THETA_TOL, allow_corollary=False):
    """Equal rates on both blocks; ``D1`` carries exponent ``0``.

    Parameters
    ----------
    allow_corollary : bool
        When the positivity condition on the entry law fails (or the weight
        of ``D1`` vanishes somewhere), return a certificate whose exponent on
        ``D1`` is only an upper bound (``optimal=False``, ``j_lower`` set)
        instead of refusing.
    """
    _check_block_cert(cert_P, dec.d1, "D1")
    _check_block_cert(cert_R, dec.d2, "D2")
    tb = cert_R.theta_bar
    if abs(cert_P.theta_bar - tb) > tol * max(tb, cert_P.theta_bar):
        raise HypothesisError(
            f"case A3 needs equal rates, got {cert_P.theta_bar!r} and {tb!r}",
            "theta_P == theta_R", "D1")
    if cert_P.j_state.any():
        raise HypothesisError("case A3 needs exponent 0 on D1", "j_P == 0",
                              int(dec.d1[np.argmax(cert_P.j_state)]))
    ls = lstar(dec, cert_R, cert_P)
    problems = []
    if not (cert_P.eta_S > 0).all():
        problems.append(("eta_P > 0", int(dec.d1[np.argmin(cert_P.eta_S)])))
    for k, ok in enumerate(ls.positive):
        if not ok:
            problems.append(("entry law charges the top level", cert_P.index_set[k]))
    if problems and not allow_corollary:
        hyp, where = problems[0]
        raise HypothesisError(f"case A3 hypothesis failed: {hyp} (at {where})", hyp, where)
    l = ls.value
    dec = replace(dec, case="A3", lstar=l)
    support = dec.support
    p1 = np.searchsorted(support, dec.d1)
    p2 = np.searchsorted(support, dec.d2)
    m = len(cert_R.index_set)
    nu = np.zeros((m, support.size))
    eta = np.zeros((m, support.size))
    mask = cert_R.j_state == l
    for i in range(m):
        nu[i, p2] = cert_R.nu[i]
        eta[i, p2] = cert_R.eta[i]
        g = cert_R.eta[i] * mask
        c = np.array([np.asarray(dec.Q.T @ nu_k).ravel() @ g for nu_k in cert_P.nu])
        eta[i, p1] = (1.0 / tb) / (1 + l) * (cert_P.eta.T @ c)
    j = np.zeros(support.size, dtype=int)
    j[p1] = 1 + l
    j[p2] = cert_R.j_state
    j_lower = None
    if problems or cert_R.j_lower is not None:
        j_lower = j.copy()
        if problems:
            j_lower[p1] = np.maximum(ls.per_state, 0)
        if cert_R.j_lower is not None:
            j_lower[p2] = cert_R.j_lower
    info = dec.as_dict()
    if problems:
        info["corollary_mode"] = [list(p) for p in problems]
    return QsdCertificate(support, tb, j, cert_R.index_set, nu, eta,
                          np.ones(support.size), Envelope("polynomial", 0.0, int(j.max())),
                          j_lower=j_lower,
                          optimal=cert_R.optimal and cert_P.optimal and not problems,
                          steps=cert_P.steps + cert_R.steps + (info,))


# ---------------------------------------------------------------- synthesis

def synthesize(chain, tol=THETA_TOL):
    """Full certificate of ``chain`` by induction over its leading strata.

    Level by level, each stratum is certified from the Perron data of its
    minimal leading classes with the faster classes above them attached by
    :func:`compose_case_A2`; strata are then stacked with
    :func:`compose_case_A3` and the classes that cannot reach a leading
    class are attached with :func:`compose_case_A1`.

    Raises
    ------
    HypothesisError
        If every class has rate 0 or a leading class is periodic.
    """
    graph = find_classes(chain)
    spectra = tuple(perron(chain, c) for c in graph.classes)
    theta = np.array([s.theta for s in spectra])
    if theta.max() <= 0:
        raise HypothesisError("every state is absorbed or left for good within one step; "
                              "no quasi-stationary distribution", "theta_bar > 0")
    graph = stratify(graph, theta, tol=tol)
    tb = graph.theta_bar
    for c in graph.fbar:
        if spectra[c].period > 1:
            raise HypothesisError(
                f"leading class {c} (states {graph.classes[c].tolist()}) has period "
                f"{spectra[c].period}", "aperiodic leading class", c)

    # Step 1: one certificate per stratum, on the chain killed outside it
    level_certs = []
    for ell, members in enumerate(graph.jbar_levels):
        leaders = graph.fbar_levels[ell]
        cert = union_certificate([certificate_from_spectrum(spectra[c], c, tb) for c in leaders], tb)
        rest = [c for c in graph.topological_order() if c in members and c not in leaders]
        for c in rest:
            dec = TwoBlockDecomposition.build(chain, graph.classes[c], cert.support)
            cert = compose_case_A2(dec, cert, tol=tol)
        level_certs.append(cert)

    # Step 2: stack strata
    cert = level_certs[0]
    for ell in range(1, len(level_certs)):
        dec = TwoBlockDecomposition.build(chain, level_certs[ell].support, cert.support)
        cert = compose_case_A3(dec, level_certs[ell], cert, tol=tol, allow_corollary=True)

    # Step 3: classes that never reach a leading class
    if graph.remainder:
        rem = graph.states_of(graph.remainder)
        dec = TwoBlockDecomposition.build(chain, cert.support, rem)
        cert = compose_case_A1(dec, cert, tol=tol)

    if not np.array_equal(cert.support, np.arange(chain.d)):
        raise QsdError("internal error: certificate does not cover the state space")
    expected = graph.j_state()
    if cert.optimal and not np.array_equal(cert.j_state, expected):
        bad = int(np.flatnonzero(cert.j_state != expected)[0])
        raise QsdError(f"internal error: exponent mismatch at state {bad}: "
                       f"{cert.j_state[bad]} vs path count {expected[bad]}")
    return replace(cert, graph=graph, spectra=spectra,
                   envelope=_global_envelope(graph, spectra, cert))


def _global_envelope(graph, spectra, cert):
    if cert.j0 > 0:
        return Envelope("polynomial", 0.0, cert.j0)
    tb = graph.theta_bar
    ratio = 0.0
    for c, s in enumerate(spectra):
        if c in graph.fbar:
            ratio = max(ratio, s.gap)
        else:
            ratio = max(ratio, (s.theta + GAMMA_EPS) / tb)
    return Envelope("geometric", float(min(ratio, 1.0)), 0)


def synthesize_components(chain, tol=THETA_TOL):
    """Separate certificates for each connected component of the class graph."""
    graph = find_classes(chain)
    out = []
    for comp in graph.components():
        states = graph.states_of(comp)
        sub = synthesize(chain.restrict(states), tol=tol)
        out.append((states, sub))
    return out


# ------------------------------------------------------------------ simplex

@dataclass(frozen=True)
class QsdSimplex:
    """Extreme QSDs at one rate, with optional lower-rate families.

    ``extreme`` rows are probability vectors over ``states`` (global
    indices); every convex combination of them is a QSD with rate ``theta``.
    """

    theta: float
    states: np.ndarray
    extreme: np.ndarray
    labels: tuple
    children: tuple = ()

    @property
    def dimension(self):
        return self.extreme.shape[0]

    def combination(self, weights):
        w = np.asarray(weights, dtype=float)
        if w.shape != (self.dimension,) or (w < 0).any() or abs(w.sum() - 1) > 1e-12:
            raise ValueError("weights must be a probability vector over the extreme points")
        return w @ self.extreme

    def as_dict(self):
        return {"theta": self.theta, "states": self.states.tolist(),
                "extreme": self.extreme.tolist(), "labels": list(self.labels),
                "children": [c.as_dict() for c in self.children]}


def qsd_simplex(cert, chain=None, recursive=False):
    """Describe all QSDs of rate ``theta_bar`` (and lower ones on request).

    With ``recursive=True`` the chain restricted to the classes that cannot
    reach a leading class is analysed again, which yields the QSD families
    with strictly smaller rates.
    """
    node = QsdSimplex(cert.theta_bar, cert.support.copy(), cert.nu.copy(),
                      tuple(cert.index_set))
    if not recursive:
        return node
    if chain is None or cert.graph is None:
        raise ValueError("recursive description needs the chain and a synthesized certificate")
    g = cert.graph
    if not g.remainder:
        return node
    rem = g.states_of(g.remainder)
    sub_chain = chain.restrict(rem)
    try:
        sub = synthesize(sub_chain)
    except HypothesisError:
        return node
    child = qsd_simplex(sub, sub_chain, recursive=True)
    child = _relabel(child, rem)
    return replace(node, children=(child,))


def _relabel(node, states):
    return replace(node, states=states[node.states],
                   children=tuple(_relabel(c, states) for c in node.children))
