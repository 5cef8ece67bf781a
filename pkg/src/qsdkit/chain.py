"""Absorbed Markov chains on a finite state space.

A chain is stored as its sub-stochastic transition matrix ``p(x, y)`` on the
states ``0..d-1``.  The cemetery state is never stored: the absorption
probability from ``x`` is the row defect ``1 - sum_y p(x, y)``.

Measures are row vectors and act on the left (``mu S_1``); functions are
column vectors (``S_1 f``).  Both are plain 1-d numpy arrays.
"""

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from .errors import ChainError

ROW_SUM_TOL = 1e-12
DENSE_LIMIT = 64
OVERFLOW_LIMIT = 1e300


class AbsorbedChain:
    """Sub-stochastic transition matrix with an implicit cemetery.

    Parameters
    ----------
    matrix : array_like or scipy.sparse matrix, shape (d, d)
        Transition probabilities between the non-absorbed states.
    weight : array_like, optional
        A weight function ``W >= 1`` attached to the chain (used for
        weighted norms).  Defaults to the constant 1.
    check : bool
        Validate on construction and raise :class:`ChainError` on failure.
        Rows whose sum exceeds one by at most ``ROW_SUM_TOL`` are rescaled to
        sum exactly to one before validation.
    """

    def __init__(self, matrix, weight=None, check=True):
        m = sp.csr_matrix(matrix, dtype=float)
        m.sum_duplicates()
        m.eliminate_zeros()
        if m.shape[0] != m.shape[1]:
            raise ChainError(f"transition matrix must be square, got {m.shape}")
        if check and m.shape[0] > 0:
            m = _renormalize_rows(m)
        self._matrix = m
        self._dense = m.toarray() if m.shape[0] <= DENSE_LIMIT else None
        if self._dense is not None:
            self._dense.flags.writeable = False
        d = m.shape[0]
        if weight is None:
            w = np.ones(d)
        else:
            w = np.asarray(weight, dtype=float).copy()
            if w.shape != (d,):
                raise ChainError(f"weight has shape {w.shape}, expected ({d},)")
        w.flags.writeable = False
        self._weight = w
        if check:
            validate(self).raise_if_invalid()

    @classmethod
    def from_dense(cls, rows, weight=None, check=True):
        return cls(np.asarray(rows, dtype=float), weight=weight, check=check)

    @classmethod
    def from_triplets(cls, d, triplets, weight=None, check=True):
        """Build from ``(from, to, prob)`` triplets; duplicates are summed."""
        triplets = list(triplets)
        if triplets:
            i, j, v = zip(*triplets)
        else:
            i, j, v = (), (), ()
        i = np.asarray(i, dtype=int)
        j = np.asarray(j, dtype=int)
        bad = [(a, b, val) for a, b, val in triplets
               if not (0 <= a < d and 0 <= b < d)]
        if bad:
            raise ChainError("state index out of range", bad)
        m = sp.coo_matrix((np.asarray(v, dtype=float), (i, j)), shape=(d, d))
        return cls(m.tocsr(), weight=weight, check=check)

    @property
    def d(self):
        return self._matrix.shape[0]

    @property
    def matrix(self):
        """The transition matrix as a CSR matrix (do not mutate)."""
        return self._matrix

    @property
    def weight(self):
        return self._weight

    def dense(self):
        """Dense copy of the transition matrix."""
        if self._dense is not None:
            return self._dense.copy()
        return self._matrix.toarray()

    def operator(self):
        """Dense array for small chains, CSR matrix otherwise."""
        return self._dense if self._dense is not None else self._matrix

    @property
    def rows(self):
        """Row-major sparse entries: ``rows[x]`` is a dict ``{y: p(x, y)}``."""
        m = self._matrix
        return [dict(zip(m.indices[m.indptr[x]:m.indptr[x + 1]].tolist(),
                         m.data[m.indptr[x]:m.indptr[x + 1]].tolist()))
                for x in range(self.d)]

    def row_sums(self):
        return np.asarray(self._matrix.sum(axis=1)).ravel()

    def absorption(self):
        """One-step absorption probabilities ``1 - sum_y p(x, y)``."""
        return np.clip(1.0 - self.row_sums(), 0.0, None)

    def support_edges(self):
        coo = self._matrix.tocoo()
        keep = coo.data > 0
        return coo.row[keep], coo.col[keep]

    def restrict(self, states):
        """Chain killed on leaving ``states``; returned on the sub-index set."""
        states = np.asarray(states, dtype=int)
        sub = self._matrix[states][:, states]
        return AbsorbedChain(sub, weight=self._weight[states], check=False)

    def permute(self, perm):
        """Relabel states: new state ``k`` is old state ``perm[k]``."""
        perm = np.asarray(perm, dtype=int)
        return AbsorbedChain(self._matrix[perm][:, perm],
                             weight=self._weight[perm], check=False)

    def __repr__(self):
        return f"AbsorbedChain(d={self.d}, nnz={self._matrix.nnz})"


def _renormalize_rows(m):
    sums = np.asarray(m.sum(axis=1)).ravel()
    fix = (sums > 1.0) & (sums <= 1.0 + ROW_SUM_TOL)
    if not fix.any():
        return m
    scale = np.ones_like(sums)
    scale[fix] = 1.0 / sums[fix]
    return sp.csr_matrix(sp.diags(scale) @ m)


@dataclass
class ValidationReport:
    d: int
    row_sums: np.ndarray
    negative_entries: list = field(default_factory=list)
    row_sum_violations: list = field(default_factory=list)
    nonfinite_entries: list = field(default_factory=list)
    isolated_states: list = field(default_factory=list)

    @property
    def ok(self):
        return not (self.negative_entries or self.row_sum_violations
                    or self.nonfinite_entries)

    @property
    def absorption(self):
        return np.clip(1.0 - self.row_sums, 0.0, None)

    @property
    def violations(self):
        return self.nonfinite_entries + self.negative_entries + self.row_sum_violations

    def raise_if_invalid(self):
        if self.ok:
            return
        parts = []
        for row, col, val in self.violations:
            if col is None:
                parts.append(f"row {row} sums to {val!r}")
            else:
                parts.append(f"p({row},{col}) = {val!r}")
        raise ChainError("invalid transition matrix: " + "; ".join(parts),
                         self.violations)

    def as_dict(self):
        return {
            "ok": self.ok,
            "d": self.d,
            "absorption": self.absorption.tolist(),
            "violations": [list(v) for v in self.violations],
            "isolated_states": list(self.isolated_states),
        }


def validate(chain):
    """Check the sub-stochastic invariants of ``chain``.

    Returns a :class:`ValidationReport`; an empty state space raises
    :class:`ChainError` directly since nothing else can be reported.
    """
    if chain.d == 0:
        raise ChainError("empty state space")
    coo = chain.matrix.tocoo()
    report = ValidationReport(d=chain.d, row_sums=chain.row_sums())
    for r, c, v in zip(coo.row.tolist(), coo.col.tolist(), coo.data.tolist()):
        if not np.isfinite(v):
            report.nonfinite_entries.append((r, c, v))
        elif v < 0:
            report.negative_entries.append((r, c, v))
    for x, s in enumerate(report.row_sums.tolist()):
        if np.isfinite(s) and s > 1.0 + ROW_SUM_TOL:
            report.row_sum_violations.append((x, None, s))
    off = coo.row != coo.col
    touched = np.zeros(chain.d, dtype=bool)
    touched[coo.row[off]] = True
    touched[coo.col[off]] = True
    report.isolated_states = np.flatnonzero(~touched).tolist()
    return report


def step_measure(chain, mu):
    """Left action ``mu S_1``."""
    mu = np.asarray(mu, dtype=float)
    return np.asarray(chain.operator().T @ mu).ravel()


def step_function(chain, f):
    """Right action ``S_1 f``."""
    f = np.asarray(f, dtype=float)
    return np.asarray(chain.operator() @ f).ravel()


def iterate(chain, v, n, theta=1.0, side="measure"):
    """Return the rescaled iterates ``theta^-k v S_k`` for ``k = 0..n``.

    ``side="function"`` iterates ``theta^-k S_k v`` instead.  Matrix powers
    are never formed.  Raises ``OverflowError`` when an entry exceeds 1e300.
    """
    if theta <= 0:
        raise ValueError("theta must be positive")
    step = step_measure if side == "measure" else step_function
    if side not in ("measure", "function"):
        raise ValueError(f"unknown side {side!r}")
    out = np.empty((n + 1, chain.d))
    cur = np.asarray(v, dtype=float)
    out[0] = cur
    for k in range(1, n + 1):
        cur = step(chain, cur) / theta
        if np.abs(cur).max(initial=0.0) > OVERFLOW_LIMIT:
            raise OverflowError(f"iterate overflow at step {k}")
        out[k] = cur
    return out


def measure_norm(mu, weight=None):
    """Weighted total variation ``|mu|(W)``."""
    mu = np.asarray(mu, dtype=float)
    if weight is None:
        return float(np.abs(mu).sum())
    return float(np.abs(mu) @ _check_weight(weight))


def function_norm(f, weight=None):
    """Weighted sup norm ``max_x |f(x)| / W(x)``."""
    f = np.asarray(f, dtype=float)
    if weight is None:
        return float(np.abs(f).max(initial=0.0))
    return float((np.abs(f) / _check_weight(weight)).max(initial=0.0))


def _check_weight(weight):
    w = np.asarray(weight, dtype=float)
    if (w < 1).any():
        raise ValueError("weights must satisfy W >= 1")
    return w
