"""Rule language for chains on the nonnegative integers, and truncation.

A rule file has one transition rule per line::

    to = max(x-1, 0) ; p = 0.7*min(x, 1)
    V = pow(1.5, x)        # optional Lyapunov weight
    # comments start with '#'

Expressions use ``+ - * /``, unary minus, parentheses, numeric literals,
the variable ``x`` and the functions ``min``, ``max`` and ``pow``.  From
state ``x`` each rule moves to ``to(x)`` with probability ``p(x)``; the
remaining mass is absorbed.
"""

from dataclasses import dataclass, field
import re
import warnings

import numpy as np

from .chain import ROW_SUM_TOL, AbsorbedChain, step_function
from .classes import find_classes, stratify
from .errors import (ConvergenceError, EvaluationError, HypothesisError, QsdError,
                     RuleSyntaxError)
from .spectral import perron

TARGET_TOL = 1e-9
FUNCTIONS = {"min": 2, "max": 2, "pow": 2}


# ---------------------------------------------------------------------- AST

@dataclass(frozen=True)
class Num:
    value: float
    span: tuple = field(default=None, compare=False, repr=False)


@dataclass(frozen=True)
class Var:
    name: str = "x"
    span: tuple = field(default=None, compare=False, repr=False)


@dataclass(frozen=True)
class Neg:
    operand: object
    span: tuple = field(default=None, compare=False, repr=False)


@dataclass(frozen=True)
class BinOp:
    op: str
    left: object
    right: object
    span: tuple = field(default=None, compare=False, repr=False)


@dataclass(frozen=True)
class Call:
    func: str
    args: tuple
    span: tuple = field(default=None, compare=False, repr=False)


@dataclass(frozen=True)
class Rule:
    target: object
    prob: object
    line: int = field(default=None, compare=False)


@dataclass(frozen=True)
class RuleSet:
    rules: tuple
    V: object = None

    def __len__(self):
        return len(self.rules)


# ------------------------------------------------------------------- lexer

_TOKEN = re.compile(r"\s*(?:(?P<num>\d+\.?\d*(?:[eE][-+]?\d+)?|\.\d+(?:[eE][-+]?\d+)?)"
                    r"|(?P<name>[A-Za-z_]\w*)|(?P<op>[-+*/(),;=]))")


def _tokenize(text, line):
    pos, out = 0, []
    while pos < len(text):
        if text[pos:].strip() == "":
            break
        m = _TOKEN.match(text, pos)
        if not m or m.end() == pos:
            col = pos + 1 + (len(text[pos:]) - len(text[pos:].lstrip()))
            raise RuleSyntaxError(f"unexpected character {text[col - 1]!r}", line, col)
        kind = m.lastgroup
        start = m.start(kind) + 1
        out.append((kind, m.group(kind), start))
        pos = m.end()
    out.append(("end", "", len(text) + 1))
    return out


class _Parser:
    def __init__(self, text, line=None):
        self.toks = _tokenize(text, line)
        self.i = 0
        self.line = line

    def peek(self):
        return self.toks[self.i]

    def take(self):
        tok = self.toks[self.i]
        self.i += 1
        return tok

    def error(self, msg, col):
        raise RuleSyntaxError(msg, self.line, col)

    def expect(self, value):
        kind, text, col = self.take()
        if text != value:
            self.error(f"expected {value!r}, found {text or 'end of line'!r}", col)
        return col

    def starts_operand(self):
        kind, text, _ = self.peek()
        return kind in ("num", "name") or text in ("(", "-")

    def expr(self):
        node = self.term()
        while self.peek()[1] in ("+", "-"):
            _, op, col = self.take()
            if not self.starts_operand():
                self.error(f"operator {op!r} is missing its right operand", col)
            node = BinOp(op, node, self.term(), (self.line, col))
        return node

    def term(self):
        node = self.unary()
        while self.peek()[1] in ("*", "/"):
            _, op, col = self.take()
            if not self.starts_operand():
                self.error(f"operator {op!r} is missing its right operand", col)
            node = BinOp(op, node, self.unary(), (self.line, col))
        return node

    def unary(self):
        if self.peek()[1] == "-":
            _, _, col = self.take()
            if not self.starts_operand():
                self.error("unary '-' is missing its operand", col)
            return Neg(self.unary(), (self.line, col))
        return self.atom()

    def atom(self):
        kind, text, col = self.take()
        if kind == "num":
            return Num(float(text), (self.line, col))
        if kind == "name":
            if text == "x":
                return Var("x", (self.line, col))
            if text in FUNCTIONS:
                self.expect("(")
                args = [self.expr()]
                while self.peek()[1] == ",":
                    self.take()
                    args.append(self.expr())
                self.expect(")")
                if len(args) != FUNCTIONS[text]:
                    self.error(f"{text} takes {FUNCTIONS[text]} arguments, got {len(args)}", col)
                return Call(text, tuple(args), (self.line, col))
            self.error(f"unknown name {text!r}", col)
        if text == "(":
            node = self.expr()
            self.expect(")")
            return node
        self.error(f"expected an operand, found {text or 'end of line'!r}", col)

    def done(self):
        kind, text, col = self.peek()
        if kind != "end":
            self.error(f"unexpected {text!r}", col)


def parse_expression(text, line=None):
    p = _Parser(text, line)
    node = p.expr()
    p.done()
    return node


def parse_rules(text):
    """Parse a rule file into a :class:`RuleSet`.

    Raises
    ------
    RuleSyntaxError
        With the 1-based line and column of the offending token.
    """
    rules, V = [], None
    for lineno, raw in enumerate(text.splitlines(), start=1):
        body = raw.split("#", 1)[0]
        if not body.strip():
            continue
        p = _Parser(body, lineno)
        kind, word, col = p.take()
        if word == "V":
            p.expect("=")
            if V is not None:
                p.error("V is defined twice", col)
            V = p.expr()
            p.done()
        elif word == "to":
            p.expect("=")
            target = p.expr()
            p.expect(";")
            kind, word, col = p.take()
            if word != "p":
                p.error(f"expected 'p', found {word or 'end of line'!r}", col)
            p.expect("=")
            prob = p.expr()
            p.done()
            rules.append(Rule(target, prob, lineno))
        else:
            p.error(f"a line must start with 'to =' or 'V =', found {word!r}", col)
    return RuleSet(tuple(rules), V)


# ----------------------------------------------------------------- printer

def format_expression(node):
    """Fully parenthesized text; parsing it back gives an equal AST."""
    if isinstance(node, Num):
        return repr(float(node.value))
    if isinstance(node, Var):
        return "x"
    if isinstance(node, Neg):
        return f"(-{format_expression(node.operand)})"
    if isinstance(node, BinOp):
        return f"({format_expression(node.left)} {node.op} {format_expression(node.right)})"
    if isinstance(node, Call):
        return f"{node.func}({', '.join(format_expression(a) for a in node.args)})"
    raise TypeError(f"not an expression node: {node!r}")


def format_rules(ruleset):
    lines = [f"to = {format_expression(r.target)} ; p = {format_expression(r.prob)}"
             for r in ruleset.rules]
    if ruleset.V is not None:
        lines.append(f"V = {format_expression(ruleset.V)}")
    return "\n".join(lines) + "\n"


# --------------------------------------------------------------- evaluator

def evaluate(node, x):
    """Evaluate ``node`` at the states ``x`` (scalar or array)."""
    xs = np.asarray(x, dtype=float)
    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        out = _eval(node, xs)
    out = np.broadcast_to(out, xs.shape).astype(float)
    bad = ~np.isfinite(out)
    if bad.any():
        k = np.flatnonzero(bad.ravel())[0]
        raise EvaluationError("expression is not finite", int(xs.ravel()[k]))
    return out


def _eval(node, xs):
    if isinstance(node, Num):
        return np.full(xs.shape, node.value)
    if isinstance(node, Var):
        return xs
    if isinstance(node, Neg):
        return -_eval(node.operand, xs)
    if isinstance(node, BinOp):
        a, b = _eval(node.left, xs), _eval(node.right, xs)
        if node.op == "+":
            return a + b
        if node.op == "-":
            return a - b
        if node.op == "*":
            return a * b
        zero = b == 0
        if np.any(zero):
            k = np.flatnonzero(np.broadcast_to(zero, xs.shape).ravel())[0]
            raise EvaluationError("division by zero", int(xs.ravel()[k]))
        return a / b
    if isinstance(node, Call):
        a, b = (_eval(arg, xs) for arg in node.args)
        if node.func == "min":
            return np.minimum(a, b)
        if node.func == "max":
            return np.maximum(a, b)
        return np.power(a, b)
    raise TypeError(f"not an expression node: {node!r}")


# -------------------------------------------------------------- truncation

@dataclass(frozen=True)
class TruncatedChain:
    N: int
    chain: AbsorbedChain
    V: np.ndarray
    boundary_policy: str = "kill"
    warnings: tuple = ()


def _as_expr(V):
    if V is None or not isinstance(V, str):
        return V
    return parse_expression(V)


def transitions(ruleset, xs):
    """Per-rule integer targets and probabilities at the states ``xs``."""
    out, notes = [], []
    for r in ruleset.rules:
        t = evaluate(r.target, xs)
        p = evaluate(r.prob, xs)
        neg = p < 0
        if neg.any():
            x = int(xs[np.flatnonzero(neg)[0]])
            raise EvaluationError(f"negative probability from rule on line {r.line}", x)
        ti = np.rint(t)
        off = (np.abs(t - ti) > TARGET_TOL) & (p > 0)
        if off.any():
            x = int(xs[np.flatnonzero(off)[0]])
            notes.append(f"line {r.line}: non-integer target {t[xs == x][0]!r} at x={x} rounded")
            warnings.warn(notes[-1])
        low = (ti < 0) & (p > 0)
        if low.any():
            x = int(xs[np.flatnonzero(low)[0]])
            raise EvaluationError(f"negative target from rule on line {r.line}", x)
        out.append((ti.astype(np.int64), p))
    return out, notes


def build_truncation(ruleset, N, V=None):
    """Chain on ``{0..N-1}``; mass sent to states ``>= N`` is absorbed.

    ``V`` is an expression (text or AST); defaults to the rule set's own
    ``V`` line, else the constant 1.  It is clipped below at 1.
    """
    if N < 1:
        raise ValueError("N must be positive")
    xs = np.arange(N)
    trans, notes = transitions(ruleset, xs)
    total = np.zeros(N)
    rows, cols, vals = [], [], []
    for t, p in trans:
        total += p
        keep = (t < N) & (p > 0)
        rows.append(xs[keep])
        cols.append(t[keep])
        vals.append(p[keep])
    over = total > 1 + ROW_SUM_TOL
    if over.any():
        x = int(np.flatnonzero(over)[0])
        raise EvaluationError(f"probabilities sum to {total[x]!r} > 1", x)
    trip = zip(np.concatenate(rows).tolist(), np.concatenate(cols).tolist(),
               np.concatenate(vals).tolist())
    chain = AbsorbedChain.from_triplets(N, trip)
    Vexpr = _as_expr(V) if V is not None else ruleset.V
    Vv = np.ones(N) if Vexpr is None else np.maximum(evaluate(Vexpr, xs), 1.0)
    return TruncatedChain(N, AbsorbedChain(chain.matrix, weight=Vv, check=False),
                          Vv, warnings=tuple(notes))


# ---------------------------------------------------------------- Lyapunov

@dataclass(frozen=True)
class LyapunovReport:
    N1: int
    N2: int
    tail_sup: float
    theta_ref: float
    drift_ok: bool
    has_cycle: bool
    leading_aperiodic: bool
    ratio: np.ndarray
    diagnostics: tuple = ()

    @property
    def passed(self):
        return self.drift_ok and self.has_cycle and self.leading_aperiodic

    def as_dict(self):
        return {"N1": self.N1, "N2": self.N2, "tail_sup": self.tail_sup,
                "theta_ref": self.theta_ref,
                "drift": "pass" if self.drift_ok else "fail",
                "cycle": "pass" if self.has_cycle else "fail",
                "aperiodic": "pass" if self.leading_aperiodic else "fail",
                "status": "pass" if self.passed else "fail",
                "diagnostics": list(self.diagnostics)}


def drift_ratio(ruleset, V, xs):
    """``E_x(V(X_1), 1 < tau) / V(x)`` from the rules, without truncation."""
    Vexpr = _as_expr(V) if V is not None else ruleset.V
    xs = np.asarray(xs)
    if Vexpr is None:
        vfun = lambda s: np.ones(np.shape(s))  # noqa: E731
    else:
        vfun = lambda s: np.maximum(evaluate(Vexpr, s), 1.0)  # noqa: E731
    trans, _ = transitions(ruleset, xs)
    num = np.zeros(xs.size)
    for t, p in trans:
        num += p * vfun(t)
    return num / vfun(xs)


def lyapunov_check(ruleset, V, N1, N2, theta_ref=None):
    """Check the drift criterion and its side conditions on a window.

    The drift ratio is evaluated on ``N1/2 <= x < N2`` and its supremum
    compared with ``theta_ref`` (default: the leading rate of the size-``N2``
    truncation).  Also reports whether some state can return to itself and
    whether the leading classes of the truncation are aperiodic.  A pass is
    consistent with the existence theory on the full space; it is not a
    proof.
    """
    if not N1 < N2:
        raise ValueError("need N1 < N2")
    trunc = build_truncation(ruleset, N2, V)
    graph = find_classes(trunc.chain)
    try:
        spectra = [perron(trunc.chain, c) for c in graph.classes]
    except ConvergenceError as exc:
        ratio = drift_ratio(ruleset, V, np.arange(N1 // 2, N2))
        return LyapunovReport(N1, N2, float(ratio.max()), float("nan") if theta_ref is None
                              else float(theta_ref), False, False, False, ratio,
                              (f"spectral solve failed at N={N2}: {exc}",))
    theta = np.array([s.theta for s in spectra])
    notes = []
    has_cycle = bool(theta.max() > 0 and any(
        c.size > 1 or trunc.chain.matrix[c[0], c[0]] > 0 for c in graph.classes))
    if not has_cycle:
        notes.append("no x_0 with positive return probability: criterion inapplicable")
    if theta_ref is None:
        theta_ref = float(theta.max())
    leading_aperiodic = True
    if theta.max() > 0:
        g = stratify(graph, theta)
        for c in g.fbar:
            if spectra[c].period > 1:
                leading_aperiodic = False
                notes.append(f"leading class {c} has period {spectra[c].period}")
    xs = np.arange(N1 // 2, N2)
    ratio = drift_ratio(ruleset, V, xs)
    tail = float(ratio.max())
    drift_ok = tail < theta_ref
    if not drift_ok:
        notes.append(f"drift ratio sup {tail:.6g} on x >= {N1 // 2} is not below "
                     f"theta_ref {theta_ref:.6g}")
    return LyapunovReport(N1, N2, tail, float(theta_ref), drift_ok, has_cycle,
                          leading_aperiodic, ratio, tuple(notes))


@dataclass(frozen=True)
class StabilityReport:
    Ns: tuple
    theta: tuple
    nu_distance: tuple
    theta_drift: tuple
    j_changed: tuple
    stable: bool
    diagnostics: tuple = ()
    certificates: tuple = field(default=(), repr=False, compare=False)

    def as_dict(self):
        return {"N": list(self.Ns), "theta_bar": list(self.theta),
                "nu_distance": list(self.nu_distance),
                "theta_drift": list(self.theta_drift),
                "j_changed": list(self.j_changed),
                "status": "pass" if self.stable else "fail",
                "diagnostics": list(self.diagnostics)}


def _signature(cert):
    g = cert.graph
    return tuple(int(g.classes[c][0]) for c in cert.index_set)


def qsd_stability(ruleset, V, Ns, tol=1e-8):
    """Compare certificates across increasing truncations.

    Extreme QSDs are matched by the smallest state of their class; distances
    are V-weighted total variation.  Stable means the distances decrease and
    the last one is at most ``tol`` with an unchanged class signature.
    """
    from .synthesis import synthesize

    Ns = tuple(sorted(Ns))
    certs, truncs = [], []
    notes = []
    for N in Ns:
        t = build_truncation(ruleset, N, V)
        truncs.append(t)
        try:
            certs.append(synthesize(t.chain))
        except (HypothesisError, QsdError) as exc:
            return StabilityReport(Ns, (), (), (), (), False, (f"N={N}: {exc}",))
    dist, drift, jchg = [], [], []
    stable = True
    for a, b, ta, tb in zip(certs, certs[1:], truncs, truncs[1:]):
        if _signature(a) != _signature(b):
            notes.append(f"leading classes change between N={ta.N} and N={tb.N}: "
                         f"{_signature(a)} vs {_signature(b)}")
            stable = False
            dist.append(float("inf"))
        else:
            na, _, ja = a.on(ta.N)
            nb, _, jb = b.on(tb.N)
            pad = np.zeros((na.shape[0], tb.N))
            pad[:, :ta.N] = na
            dist.append(float(max(np.abs(pad[i] - nb[i]) @ tb.V for i in range(nb.shape[0]))))
            jchg.append(bool(np.any(ja != jb[:ta.N])))
        drift.append(abs(a.theta_bar - b.theta_bar))
    if dist:
        if any(np.diff(dist) > 0):
            stable = False
            notes.append("distances between consecutive truncations do not decrease")
        if not dist[-1] <= tol:
            stable = False
            notes.append(f"last distance {dist[-1]:.3g} exceeds {tol:g}")
    if stable:
        notes.append("consistent with convergence of the truncated QSDs")
    return StabilityReport(Ns, tuple(c.theta_bar for c in certs), tuple(dist),
                           tuple(drift), tuple(jchg), stable, tuple(notes), tuple(certs))


def truncation_survival(ruleset, Ns, x, n_max=100):
    """Survival ``P_x(n < tau)`` for ``n <= n_max`` under each truncation."""
    out = []
    for N in Ns:
        t = build_truncation(ruleset, N)
        f = np.ones(N)
        row = [1.0]
        for _ in range(n_max):
            f = step_function(t.chain, f)
            row.append(float(f[x]))
        out.append(row)
    return np.array(out)
