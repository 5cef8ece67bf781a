"""Brute-force and Monte Carlo checks of a certificate.

Everything here works from the transition matrix alone (repeated one-step
actions, no eigen-solvers), so it is an independent witness for the
quantities produced by :mod:`qsdkit.synthesis`.
"""

from dataclasses import dataclass, field

import numpy as np

from .chain import step_function, step_measure
from .errors import QsdError

ATOL = 1e-10
J_FLAG = 0.2
# slack on the calibrated constant: a residual that is O(alpha) but whose
# ratio to alpha still creeps up passes, a residual that decays more slowly
# than alpha (ratio doubling over the test half) does not
MARGIN = 1.25


# ----------------------------------------------------------- rescaled powers

def rescaled_powers(chain, f=None, n_max=100, rescale_every=1):
    """Return ``(values, logscale)`` with ``S_k f = values[k] * exp(logscale[k])``.

    The function is renormalized by its sup norm every ``rescale_every``
    steps so long horizons neither underflow nor overflow.
    """
    cur = np.ones(chain.d) if f is None else np.asarray(f, dtype=float).copy()
    vals = np.empty((n_max + 1, chain.d))
    logs = np.zeros(n_max + 1)
    vals[0] = cur
    acc = 0.0
    for k in range(1, n_max + 1):
        cur = step_function(chain, cur)
        if k % rescale_every == 0:
            s = np.abs(cur).max(initial=0.0)
            if s > 0:
                cur = cur / s
                acc += np.log(s)
        vals[k] = cur
        logs[k] = acc
    return vals, logs


UNDERFLOW = 1e-290


def _log_survival(chain, n_max, f=None):
    vals, logs = rescaled_powers(chain, f, n_max)
    # entries this far below the sup have lost all precision
    vals = np.where(vals < UNDERFLOW, 0.0, vals)
    with np.errstate(divide="ignore"):
        return np.log(vals) + logs[:, None]


def estimate_theta(chain, x, n_max=2000, _logs=None):
    """Empirical decay rate of the survival probability from ``x``.

    Least-squares slope of ``log P_x(n < tau)`` over ``[n_max/2, n_max]``;
    0 when the chain started at ``x`` is absorbed surely by ``n_max``.
    """
    ls = _log_survival(chain, n_max) if _logs is None else _logs
    col = ls[:, x]
    n = np.arange(n_max // 2, n_max + 1)
    y = col[n]
    if not np.all(np.isfinite(y)):
        return 0.0
    slope = np.polyfit(n, y, 1)[0]
    return float(np.exp(slope))


@dataclass(frozen=True)
class JEstimate:
    j: int
    unrounded: float
    flagged: bool
    subleading: bool = False


def estimate_j(chain, x, theta_bar, n_max=4000, _logs=None):
    """Polynomial exponent from the dyadic ratio ``m_n / m_{n/2}``.

    ``m_n = theta_bar^-n P_x(n < tau)``.  States whose survival decays
    strictly faster than ``theta_bar^n`` get exponent 0 and are marked
    ``subleading``; non-integer-looking values are ``flagged``.
    """
    ls = _log_survival(chain, n_max) if _logs is None else _logs
    a, b = ls[n_max, x], ls[n_max // 2, x]
    if not (np.isfinite(a) and np.isfinite(b)):
        return JEstimate(0, float("-inf"), True, True)
    lt = np.log(theta_bar)
    u = ((a - n_max * lt) - (b - (n_max // 2) * lt)) / np.log(n_max / (n_max // 2))
    if u < -0.5:
        return JEstimate(0, float(u), False, True)
    j = int(round(u))
    return JEstimate(j, float(u), abs(u - j) > J_FLAG)


# --------------------------------------------------------------- envelopes

@dataclass(frozen=True)
class EnvelopeFit:
    passed: bool
    constant: float
    worst_ratio: float
    diverging: bool
    witness_n: int = None


def fit_envelope(n, residual, alpha, atol=ATOL, margin=MARGIN):
    """Fit ``residual <= C alpha + atol`` on the first half, test on the second.

    ``C`` is ``margin`` times the largest calibration ratio.  The test also
    refuses a residual that keeps growing over the last decade of ``n``.
    """
    n = np.asarray(n)
    residual = np.asarray(residual, dtype=float)
    alpha = np.asarray(alpha, dtype=float)
    half = n.size // 2
    cal = slice(0, half)
    live = residual[cal] > atol
    if live.any():
        c = margin * float(np.max(residual[cal][live] / alpha[cal][live]))
    else:
        c = 0.0
    test = slice(half, None)
    bound = c * alpha[test] + atol
    ratio = residual[test] / bound
    worst = float(ratio.max(initial=0.0))
    tail = residual[-max(2, n.size // 10):]
    diverging = bool(tail[-1] > atol and np.all(np.diff(tail) > 0))
    witness = None
    if worst > 1 or diverging:
        witness = int(n[test][int(np.argmax(ratio))])
    return EnvelopeFit(worst <= 1 and not diverging, c, worst, diverging, witness)


@dataclass(frozen=True)
class LimitCheck:
    passed: bool
    n: np.ndarray
    residual: np.ndarray
    limit: float
    fit: EnvelopeFit
    measured_ratio: float = None
    witness: tuple = None

    def as_dict(self):
        return {"status": "pass" if self.passed else "fail",
                "limit": self.limit, "constant": self.fit.constant,
                "worst_ratio": self.fit.worst_ratio,
                "measured_ratio": self.measured_ratio,
                "witness": None if self.witness is None else list(self.witness),
                "n": self.n.tolist(), "residual": self.residual.tolist()}


def check_limit(chain, cert, x=None, f=None, n_max=400, mu=None, atol=ATOL):
    """Compare ``theta^-n n^-j E_x(f(X_n), n < tau)`` with its certified limit.

    Pass ``x`` for a point start or ``mu`` for a (possibly signed) initial
    measure.  The residual is fitted to the certificate's envelope shape:
    a constant is calibrated on the first half of ``n`` and tested on the
    second half.
    """
    nu, eta, j = cert.on(chain.d)
    f = np.ones(chain.d) if f is None else np.asarray(f, dtype=float)
    if mu is None:
        mu = np.zeros(chain.d)
        mu[x] = 1.0
    mu = np.asarray(mu, dtype=float)
    sup = np.abs(mu) > 0
    jm = int(j[sup].max(initial=0))
    limit = float(sum((mu * (j == jm)) @ eta[i] * (nu[i] @ f) for i in range(nu.shape[0])))
    tb = cert.theta_bar
    n = np.arange(1, n_max + 1)
    vals = np.empty(n_max)
    cur = mu.copy()
    for k in range(1, n_max + 1):
        cur = step_measure(chain, cur) / tb
        vals[k - 1] = cur @ f
    vals = vals / n.astype(float) ** jm
    residual = np.abs(vals - limit)
    scale = max(1.0, abs(limit))
    alpha = cert.envelope.alpha(n)
    fit = fit_envelope(n, residual, alpha, atol * scale)
    measured = None
    live = residual > 1e3 * atol * scale
    if cert.envelope.kind == "geometric" and live.sum() >= 4:
        idx = np.flatnonzero(live)
        idx = idx[idx.size // 4:]
        measured = float(np.exp(np.polyfit(n[idx], np.log(residual[idx]), 1)[0]))
    witness = None
    if not fit.passed:
        witness = (None if x is None else int(x), "f", fit.witness_n)
    return LimitCheck(fit.passed, n, residual, limit, fit, measured, witness)


# --------------------------------------------------------------- invariants

@dataclass
class Check:
    status: str
    detail: str = ""
    witnesses: list = field(default_factory=list)

    def as_dict(self):
        return {"status": self.status, "detail": self.detail,
                "witnesses": [list(w) if isinstance(w, tuple) else w for w in self.witnesses]}


@dataclass
class InvariantReport:
    checks: dict

    @property
    def passed(self):
        return all(c.status != "fail" for c in self.checks.values())

    def failed(self):
        return sorted(k for k, c in self.checks.items() if c.status == "fail")

    def as_dict(self):
        return {k: v.as_dict() for k, v in self.checks.items()}


def masked_identity_error(chain, cert, n_max=50):
    """Worst relative error of the masked eigen-identity over ``n <= n_max``.

    For each exponent level ``l`` the function ``eta_S 1_{j = l}`` is pushed
    forward ``n`` steps and compared with ``theta^n eta_S`` on the states of
    level ``l``.  Errors are relative to ``theta^n max eta_S``.
    Returns ``(error, witness)`` with witness ``(x, n)``.
    """
    _, eta, j = cert.on(chain.d)
    es = eta.sum(axis=0)
    scale = max(np.abs(es).max(initial=0.0), 1e-300)
    tb = cert.theta_bar
    worst, witness = 0.0, None
    for ell in np.unique(j):
        on = j == ell
        h = es * on
        for n in range(1, n_max + 1):
            h = step_function(chain, h) / tb
            err = np.abs(h[on] - es[on]) / scale
            k = int(np.argmax(err))
            if err[k] > worst:
                worst = float(err[k])
                witness = (int(np.flatnonzero(on)[k]), n)
    return worst, witness


def check_invariants(chain, cert, n_max=50, tol=1e-10):
    """Structural identities any valid certificate must satisfy.

    ``monotone_j``: no transition increases the exponent.
    ``masked_identity``: the eigen-identity of ``eta_S`` restricted to the
    starting exponent level, for ``n <= n_max``.
    ``qsd_decomposition``: each extreme QSD is a probability vector that
    charges no state of positive exponent and satisfies
    ``nu_i(eta_k) = 1_{i = k}``.
    ``fixed_point``: ``nu_i S_1 = theta nu_i``.
    """
    nu, eta, j = cert.on(chain.d)
    checks = {}
    r, c = chain.support_edges()
    up = j[c] > j[r]
    checks["monotone_j"] = Check(
        "fail" if up.any() else "pass",
        f"{int(up.sum())} transitions increase j",
        [(int(a), int(b)) for a, b in zip(r[up], c[up])][:10])

    err, wit = masked_identity_error(chain, cert, n_max)
    checks["masked_identity"] = Check(
        "fail" if err > tol else "pass", f"max relative error {err:.3e}",
        [wit] if err > tol and wit else [])

    bad = []
    for i in range(nu.shape[0]):
        pos_mass = float(nu[i][j > 0].sum())
        if pos_mass > tol:
            bad.append((i, "mass on j>0", pos_mass))
        if (nu[i] < -tol).any() or abs(nu[i].sum() - 1) > tol:
            bad.append((i, "not a probability", float(nu[i].sum())))
        for k in range(eta.shape[0]):
            v = float(nu[i] @ eta[k])
            if abs(v - (1.0 if i == k else 0.0)) > tol * max(1.0, np.abs(eta[k]).max()):
                bad.append((i, f"nu_i(eta_{k})", v))
    checks["qsd_decomposition"] = Check("fail" if bad else "pass",
                                        f"{len(bad)} violations", bad)

    bad = []
    for i in range(nu.shape[0]):
        img = step_measure(chain, nu[i])
        res = float(np.abs(img - cert.theta_bar * nu[i]).sum())
        lam = float(img.sum() / nu[i].sum()) if nu[i].sum() else 0.0
        if res > tol or abs(lam - cert.theta_bar) > tol:
            bad.append((i, res, lam))
    checks["fixed_point"] = Check("fail" if bad else "pass",
                                  f"{len(bad)} extreme points off the fixed-point equation", bad)
    return InvariantReport(checks)


# ---------------------------------------------------------- conditional law

@dataclass(frozen=True)
class ConditionalLaw:
    law: np.ndarray
    log_survival: float
    target: np.ndarray = None
    tv: np.ndarray = None
    fit: EnvelopeFit = None

    @property
    def passed(self):
        return None if self.fit is None else self.fit.passed


def conditional_law(chain, mu, n, cert=None):
    """Exact law of ``X_n`` given survival, started from ``mu``.

    With a certificate the total-variation (L1) distance to the certified
    mixture ``sum_i mu(n^j eta_i) nu_i / sum_i mu(n^j eta_i)`` is recorded
    for every step ``1..n`` and fitted to the certificate's envelope.
    """
    cur = np.asarray(mu, dtype=float)
    if cur.sum() <= 0:
        raise ValueError("initial measure must have positive mass")
    logs = np.log(cur.sum())
    cur = cur / cur.sum()
    tv = np.empty(n)
    if cert is not None:
        nu, eta, j = cert.on(chain.d)
        mu0 = np.asarray(mu, dtype=float)
        if mu0 @ eta.sum(axis=0) <= 0:
            raise ValueError("initial measure does not charge the certified weight")
        jmax = int(j[mu0 > 0].max(initial=0))
    for k in range(1, n + 1):
        cur = step_measure(chain, cur)
        s = cur.sum()
        if s <= 0:
            raise QsdError(f"survival probability is zero at step {k}")
        logs += np.log(s)
        cur = cur / s
        if cert is not None:
            target = _mixture(mu0, k, j, jmax, nu, eta)
            tv[k - 1] = np.abs(cur - target).sum()
    if cert is None:
        return ConditionalLaw(cur, float(logs))
    steps = np.arange(1, n + 1)
    fit = fit_envelope(steps, tv, 2 * cert.envelope.alpha(steps))
    return ConditionalLaw(cur, float(logs), target, tv, fit)


def _mixture(mu, n, j, jmax, nu, eta):
    # weights mu(n^j eta_i), rescaled by n^-jmax to stay finite
    w = np.array([(mu * (float(n) ** (j - jmax))) @ eta[i] for i in range(nu.shape[0])])
    return w @ nu / w.sum()


# -------------------------------------------------------------- Monte Carlo

@dataclass(frozen=True)
class MonteCarloLaw:
    law: np.ndarray
    counts: np.ndarray
    survivors: int
    samples: int
    seed: int
    n: int

    def standard_errors(self, p):
        p = np.asarray(p, dtype=float)
        return np.sqrt(p * (1 - p) / self.survivors)

    def agrees_with(self, p, k=3.0):
        """Per-state agreement within ``k`` binomial standard errors."""
        p = np.asarray(p, dtype=float)
        se = self.standard_errors(p)
        dev = np.abs(self.law - p)
        return bool(np.all(dev <= k * se + 1e-15)), dev / np.where(se > 0, se, np.inf)

    def as_dict(self):
        return {"law": self.law.tolist(), "counts": self.counts.tolist(),
                "survivors": self.survivors, "samples": self.samples,
                "seed": self.seed, "n": self.n}


def monte_carlo_conditional(chain, x, n, samples, seed=0):
    """Simulate ``samples`` trajectories from ``x`` for ``n`` steps.

    Uses a Philox counter-based generator seeded with ``seed``.  The
    returned law is the empirical distribution of the survivors.
    """
    if samples < 1:
        raise ValueError("samples must be >= 1")
    d = chain.d
    rng = np.random.Generator(np.random.Philox(seed))
    dense = chain.dense()
    cum = np.cumsum(dense, axis=1)
    state = np.full(samples, x, dtype=np.int64)
    for _ in range(n):
        u = rng.random(state.size)
        nxt = np.empty_like(state)
        for s in np.unique(state):
            idx = np.flatnonzero(state == s)
            nxt[idx] = np.searchsorted(cum[s], u[idx], side="right")
        state = nxt[nxt < d]  # index d means absorbed
        if state.size == 0:
            raise QsdError(f"no trajectory survived {n} steps; "
                           "increase samples or decrease n")
    counts = np.bincount(state, minlength=d)
    return MonteCarloLaw(counts / state.size, counts, int(state.size), samples, seed, n)


# ------------------------------------------------------------------- trace

@dataclass(frozen=True)
class OracleTrace:
    n_max: int
    states: tuple
    m: np.ndarray
    residual: np.ndarray
    theta_hat: np.ndarray
    j_hat: tuple
    seeds: tuple = ()

    def as_dict(self, every=None):
        step = every or max(1, self.n_max // 50)
        ns = list(range(step, self.n_max + 1, step))
        return {
            "n_max": self.n_max,
            "states": list(self.states),
            "theta_hat": self.theta_hat.tolist(),
            "j_hat": [e.j for e in self.j_hat],
            "j_unrounded": [e.unrounded for e in self.j_hat],
            "j_flagged": [e.flagged for e in self.j_hat],
            "n": ns,
            "residual": [[float(self.residual[n - 1, k]) for n in ns]
                         for k in range(len(self.states))],
        }


def trace(chain, cert, n_max=2000, states=None):
    """Empirical rate, exponent and limit residual for each state."""
    states = tuple(range(chain.d)) if states is None else tuple(states)
    ls = _log_survival(chain, n_max)
    _, _, j = cert.on(chain.d)
    es = cert.eta_S
    es_full = np.zeros(chain.d)
    es_full[cert.support] = es
    n = np.arange(1, n_max + 1)
    m = np.exp(ls[1:] - n[:, None] * np.log(cert.theta_bar))
    res = np.abs(m / n[:, None].astype(float) ** j[None, :] - es_full[None, :])
    th = np.array([estimate_theta(chain, x, n_max, ls) for x in states])
    jh = tuple(estimate_j(chain, x, cert.theta_bar, n_max, ls) for x in states)
    idx = list(states)
    return OracleTrace(n_max, states, m[:, idx], res[:, idx], th, jh)
