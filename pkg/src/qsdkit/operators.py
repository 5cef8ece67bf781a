"""Polynomial-limit operators and their block-triangular compositions.

An operator ``M`` satisfies the polynomial-limit property with data
``(J, E, alpha)`` when ``||n^-J M^n - E|| <= alpha_n`` with ``alpha_n -> 0``.
Matrices act on column vectors and the assembled two-block operator is

    S = [[P, 0],
         [Q, R]]

on ``B1 + B2``, so ``Q`` (shape ``d2 x d1``) carries mass from ``B1`` into
``B2`` and the cross block of ``S^n`` is ``sum_k R^(n-k) Q P^(k-1)``.
All norms are the induced 1-norm.
"""

from dataclasses import dataclass, field
from math import factorial

import numpy as np

from .errors import OperatorFitError

UNIT_TOL = 1e-4      # eigenvalues this close to 1 belong to the unit cluster
CIRCLE_TOL = 1e-6    # moduli this close to 1 sit on the unit circle
IDENTITY_TOL = 1e-10
J_ROUND = 0.2


def opnorm(a):
    a = np.atleast_2d(a)
    if a.size == 0:
        return 0.0
    return float(np.linalg.norm(a, 1))


@dataclass(frozen=True)
class HOperator:
    M: np.ndarray
    J: int
    E: np.ndarray
    alpha: np.ndarray
    degenerate: bool = False
    notes: tuple = field(default=(), compare=False)

    def identity_residuals(self):
        """Residuals of ``M E = E``, ``E M = E`` and the power bound."""
        E, M = self.E, self.M
        scale = max(1.0, opnorm(E))
        out = {"ME-E": opnorm(M @ E - E) / scale, "EM-E": opnorm(E @ M - E) / scale}
        pw = np.eye(M.shape[0])
        worst = 0.0
        for n in range(1, self.alpha.size):
            pw = pw @ M
            bound = (self.alpha[n] + opnorm(E)) * n ** self.J
            worst = max(worst, opnorm(pw) - bound)
        out["power_bound_excess"] = max(worst, 0.0)
        return out

    def unit_eigvec_residual(self):
        """Worst ``|E x - 1_{J=0} x|`` over eigenvectors of ``M`` at 1."""
        w, v = np.linalg.eig(self.M)
        worst = 0.0
        for k in np.flatnonzero(np.abs(w - 1) <= 1e-9):
            x = v[:, k]
            target = x if self.J == 0 else 0 * x
            worst = max(worst, float(np.abs(self.E @ x - target).max()))
        return worst

    def as_dict(self):
        return {"J": self.J, "E": self.E.tolist(), "alpha_last": float(self.alpha[-1]),
                "degenerate": self.degenerate}


def _check_spectrum(M):
    w = np.linalg.eigvals(M)
    mods = np.abs(w)
    if mods.size and mods.max() > 1 + UNIT_TOL:
        raise OperatorFitError(
            f"spectral radius {mods.max():.6g} exceeds 1; normalize by the leading eigenvalue first")
    rot = (mods >= 1 - CIRCLE_TOL) & (np.abs(w - 1) > UNIT_TOL)
    if rot.any():
        k = int(np.flatnonzero(rot)[0])
        raise OperatorFitError(
            f"no polynomial limit: eigenvalue with modulus {mods[k]:.6g} and "
            f"argument {np.angle(w[k]):.6g} rotates on the unit circle")


def fit_H(M, n_max=400, J=None):
    """Fit ``(J, E, alpha)`` to the powers of ``M``.

    ``J`` is the dyadic log-ratio of ``||M^n||`` between ``n_max/2`` and
    ``n_max``, rounded.  ``E`` is the ``J``-th forward difference of the
    powers at the end of the window divided by ``J!``, which cancels every
    lower-order polynomial term exactly.  ``alpha_n`` is the running
    suffix maximum of the residual, with ``alpha_0 = 1``.

    Raises
    ------
    OperatorFitError
        When an eigenvalue other than 1 lies on the unit circle, the spectral
        radius exceeds 1, the growth exponent is not near an integer, or the
        fitted limit violates ``M E = E M = E``.
    """
    M = np.asarray(M, dtype=float)
    _check_spectrum(M)
    d = M.shape[0]
    powers = np.empty((n_max + 1, d, d))
    powers[0] = np.eye(d)
    for n in range(1, n_max + 1):
        powers[n] = powers[n - 1] @ M
    norms = np.array([opnorm(p) for p in powers])
    notes = []
    if J is None:
        hi, lo = norms[n_max], norms[n_max // 2]
        if hi <= 1e-300 or lo <= 1e-300:
            u = -np.inf
        else:
            u = np.log(hi / lo) / np.log(n_max / (n_max // 2))
        if u < -0.5:
            J = 0
            notes.append("powers decay: limit is 0")
        else:
            J = int(round(u))
            if abs(u - J) > J_ROUND:
                raise OperatorFitError(f"growth exponent {u:.4f} is not close to an integer")
    top = n_max - J
    diff = powers[top - J:top + 1] if J else powers[top:top + 1]
    for _ in range(J):
        diff = np.diff(diff, axis=0)
    E = diff[-1] / factorial(J)
    n = np.arange(1, n_max + 1)
    res = np.array([opnorm(powers[k] / float(k) ** J - E) for k in n])
    alpha = np.concatenate([[1.0], np.maximum.accumulate(res[::-1])[::-1]])
    h = HOperator(M, J, E, alpha, degenerate=opnorm(E) == 0.0, notes=tuple(notes))
    ids = h.identity_residuals()
    if ids["ME-E"] > IDENTITY_TOL or ids["EM-E"] > IDENTITY_TOL:
        raise OperatorFitError(f"fitted limit is not invariant: {ids}")
    return h


# ------------------------------------------------------------------ blocks

def assemble(P, Q, R):
    P, Q, R = (np.atleast_2d(np.asarray(a, dtype=float)) for a in (P, Q, R))
    d1, d2 = P.shape[0], R.shape[0]
    if Q.shape != (d2, d1):
        raise ValueError(f"Q must have shape {(d2, d1)}, got {Q.shape}")
    S = np.zeros((d1 + d2, d1 + d2))
    S[:d1, :d1] = P
    S[d1:, :d1] = Q
    S[d1:, d1:] = R
    return S


def block_power_identity(P, Q, R, n_max=10):
    """Largest deviation of ``S^n`` from its block formula for ``n <= n_max``."""
    P, Q, R = (np.asarray(a, dtype=float) for a in (P, Q, R))
    S = assemble(P, Q, R)
    worst = 0.0
    Sn = np.eye(S.shape[0])
    for n in range(1, n_max + 1):
        Sn = Sn @ S
        cross = sum(np.linalg.matrix_power(R, n - k) @ Q @ np.linalg.matrix_power(P, k - 1)
                    for k in range(1, n + 1))
        expect = assemble(np.linalg.matrix_power(P, n), cross, np.linalg.matrix_power(R, n))
        worst = max(worst, float(np.abs(Sn - expect).max()))
    return worst


def _radius(a):
    return float(np.abs(np.linalg.eigvals(a)).max(initial=0.0))


def _power_norms(a, n_max):
    out = np.empty(n_max + 1)
    p = np.eye(a.shape[0])
    for n in range(n_max + 1):
        out[n] = opnorm(p)
        p = p @ a
    return out


@dataclass(frozen=True)
class Composition:
    case: int
    S: np.ndarray
    predicted_J: int
    predicted_E: np.ndarray
    predicted_alpha: np.ndarray
    fitted: HOperator
    degenerate: bool = False

    @property
    def error(self):
        return opnorm(self.predicted_E - self.fitted.E)

    @property
    def j_match(self):
        return self.predicted_J == self.fitted.J

    def as_dict(self):
        return {"case": self.case, "predicted_J": self.predicted_J,
                "fitted_J": self.fitted.J, "error": self.error,
                "degenerate": self.degenerate,
                "identities": self.fitted.identity_residuals()}


def compose_case1(P_H, Q, R, n_max=400):
    """Leading block ``P`` with a summable downstream block ``R``.

    Predicts ``J_S = J_P`` and ``E_S`` with lower-left block
    ``(I - R)^-1 Q E_P``, then checks against :func:`fit_H` of ``S``.
    """
    Q, R = np.atleast_2d(Q).astype(float), np.atleast_2d(R).astype(float)
    if _radius(R) >= 1:
        raise OperatorFitError("case 1 needs spectral radius of R below 1")
    d1, d2 = P_H.M.shape[0], R.shape[0]
    E = np.zeros((d1 + d2, d1 + d2))
    E[:d1, :d1] = P_H.E
    E[d1:, :d1] = np.linalg.solve(np.eye(d2) - R, Q @ P_H.E)
    gam = _power_norms(R, n_max + 1)
    Gam = np.cumsum(gam[::-1])[::-1]
    aP, J = P_H.alpha, P_H.J
    alpha = np.empty(n_max + 1)
    alpha[0] = 1.0
    for n in range(1, n_max + 1):
        k = np.arange(n)
        ap = _tail(aP, n - k - 1)
        alpha[n] = _tail(aP, [n])[0] + Gam[n] + np.sum(gam[k] * ((ap + 1) * J * (k + 1) / n + ap))
    S = assemble(P_H.M, Q, R)
    return Composition(1, S, J, E, alpha, fit_H(S, n_max))


def compose_case2(P, Q, R_H, n_max=400):
    """Summable upstream block ``P`` feeding a leading block ``R``.

    Predicts ``J_S = J_R`` and ``E_S`` with blocks ``E_R`` (lower right)
    and ``E_R Q (I - P)^-1`` (lower left).
    """
    P, Q = np.atleast_2d(P).astype(float), np.atleast_2d(Q).astype(float)
    if _radius(P) >= 1:
        raise OperatorFitError("case 2 needs spectral radius of P below 1")
    d1, d2 = P.shape[0], R_H.M.shape[0]
    E = np.zeros((d1 + d2, d1 + d2))
    E[d1:, d1:] = R_H.E
    E[d1:, :d1] = R_H.E @ Q @ np.linalg.inv(np.eye(d1) - P)
    th = _power_norms(P, n_max + 1)
    Th = np.cumsum(th[::-1])[::-1]
    aR, J = R_H.alpha, R_H.J
    alpha = np.empty(n_max + 1)
    alpha[0] = 1.0
    for n in range(1, n_max + 1):
        k = np.arange(n)
        alpha[n] = _tail(aR, [n])[0] + Th[n] + np.sum(th[k] * (_tail(aR, n - k - 1) + J * k / n))
    S = assemble(P, Q, R_H.M)
    return Composition(2, S, J, E, alpha, fit_H(S, n_max))


def compose_case3(P_H, Q, R_H, n_max=400):
    """Two leading blocks; ``P`` must have ``J_P = 0``.

    Predicts ``J_S = 1 + J_R`` and ``E_S`` with lower-left block
    ``E_R Q E_P / (1 + J_R)``.  A vanishing coupling ``E_R Q E_P`` makes the
    prediction degenerate (limit 0, any exponent fits); the fit then uses
    the exponent the powers actually show.
    """
    if P_H.J != 0:
        raise OperatorFitError(f"case 3 needs J_P = 0, got {P_H.J}")
    Q = np.atleast_2d(Q).astype(float)
    d1, d2 = P_H.M.shape[0], R_H.M.shape[0]
    JS = 1 + R_H.J
    E = np.zeros((d1 + d2, d1 + d2))
    E[d1:, :d1] = R_H.E @ Q @ P_H.E / JS
    degenerate = opnorm(E) <= 1e-14
    aP, aR = P_H.alpha, R_H.alpha
    alpha = np.empty(n_max + 1)
    alpha[0] = 1.0
    amax = aP.max()
    for n in range(1, n_max + 1):
        k = np.arange(n + 1)
        alpha[n] = (R_H.J + np.sum(_tail(aP, k))
                    + (amax + 1) * np.sum(_tail(aR, n - k) * ((n - k) / n) ** R_H.J)) / n
    S = assemble(P_H.M, Q, R_H.M)
    fitted = fit_H(S, n_max)
    return Composition(3, S, JS, E, alpha, fitted, degenerate=degenerate)


def _tail(alpha, idx):
    # alpha beyond the sampled range is continued by its last value
    idx = np.minimum(np.asarray(idx), alpha.size - 1)
    return alpha[idx]


# ---------------------------------------------------------------- fixtures

def _rng(seed, instance=0):
    return np.random.Generator(np.random.Philox(np.random.SeedSequence([seed, instance])))


def perron_normalized(rng, d):
    """Positive matrix divided by its Perron root (leading eigenvalue 1)."""
    a = rng.uniform(0.1, 1.0, size=(d, d))
    return a / _radius(a)


def substochastic(rng, d, scale=1.0):
    a = rng.uniform(0.0, 1.0, size=(d, d))
    a = a / a.sum(axis=1, keepdims=True) * rng.uniform(0.5, 1.0, size=(d, 1))
    return scale * a


def random_instance(case, seed=0, instance=0, n_max=400):
    """Seeded random inputs ``(first, Q, second)`` for :func:`compose_case1..3`.

    Leading blocks are fitted ``HOperator`` objects; summable blocks are
    ``0.4`` times a random sub-stochastic matrix.
    """
    rng = _rng(seed, instance)
    d1, d2 = rng.integers(2, 5, size=2)
    Q = rng.uniform(0.0, 1.0, size=(d2, d1))
    if case == 1:
        return fit_H(perron_normalized(rng, d1), n_max), Q, substochastic(rng, d2, 0.4)
    if case == 2:
        return substochastic(rng, d1, 0.4), Q, fit_H(perron_normalized(rng, d2), n_max)
    if case == 3:
        return fit_H(perron_normalized(rng, d1), n_max), Q, fit_H(perron_normalized(rng, d2), n_max)
    raise ValueError(f"unknown case {case}")


COMPOSE = {1: compose_case1, 2: compose_case2, 3: compose_case3}


def run_batch(case, seed=0, instances=100, n_max=400):
    """Compose ``instances`` random fixtures of one case and summarize."""
    rows = []
    for i in range(instances):
        a, Q, b = random_instance(case, seed, i, n_max)
        comp = COMPOSE[case](a, Q, b, n_max)
        ids = comp.fitted.identity_residuals()
        rows.append({"instance": i, "error": comp.error, "predicted_J": comp.predicted_J,
                     "fitted_J": comp.fitted.J, "ME-E": ids["ME-E"], "EM-E": ids["EM-E"]})
    return rows
