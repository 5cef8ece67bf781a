"""Chain files and JSON reports.

A chain file is plain text::

    qsd-chain v1 d=2
    # from to prob   (0-based)
    0 0 0.5
    1 0 0.3
    1 1 0.5
    weight 1 2.0      # optional

Duplicate ``from to`` entries are summed with a warning.
"""

import hashlib
import json
import re
import warnings
from pathlib import Path

import numpy as np

from .chain import AbsorbedChain, validate
from .errors import ChainError

HEADER = re.compile(r"^qsd-chain\s+v1\s+d=(\d+)\s*$")
SCHEMA_VERSION = "1"


class ChainFileError(ChainError):
    """Malformed chain file; the message carries ``file:line``."""

    def __init__(self, message, path=None, line=None):
        where = f"{path or '<input>'}:{line}: " if line is not None else f"{path or '<input>'}: "
        super().__init__(where + message)
        self.path = path
        self.line = line


def parse_chain(text, path=None):
    """Parse chain-file text into a validated :class:`AbsorbedChain`.

    Raises
    ------
    ChainFileError
        On syntax errors, out-of-range indices, or a chain that fails
        validation (the message then names the offending row).
    """
    d = None
    entries = {}
    where = {}
    weight = None
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if d is None:
            m = HEADER.match(line)
            if not m:
                raise ChainFileError("expected header 'qsd-chain v1 d=<int>'", path, lineno)
            d = int(m.group(1))
            if d < 1:
                raise ChainFileError("empty state space", path, lineno)
            continue
        parts = line.split()
        try:
            if parts[0] == "weight":
                if len(parts) != 3:
                    raise ValueError
                s, v = int(parts[1]), float(parts[2])
                _check_state(s, d, path, lineno)
                if weight is None:
                    weight = np.ones(d)
                weight[s] = v
                continue
            if len(parts) != 3:
                raise ValueError
            i, j, p = int(parts[0]), int(parts[1]), float(parts[2])
        except ValueError:
            raise ChainFileError(f"cannot parse {line!r}; expected '<from> <to> <prob>'",
                                 path, lineno) from None
        _check_state(i, d, path, lineno)
        _check_state(j, d, path, lineno)
        if (i, j) in entries:
            warnings.warn(f"{path or '<input>'}:{lineno}: duplicate entry ({i}, {j}) "
                          f"summed with line {where[i, j]}")
            entries[i, j] += p
        else:
            entries[i, j] = p
            where[i, j] = lineno
    if d is None:
        raise ChainFileError("missing header 'qsd-chain v1 d=<int>'", path)
    trip = [(i, j, p) for (i, j), p in sorted(entries.items())]
    chain = AbsorbedChain.from_triplets(d, trip, check=False)
    report = validate(chain)
    if not report.ok:
        lines = []
        for row, _, s in report.row_sum_violations:
            first = min((ln for (i, _), ln in where.items() if i == row), default=None)
            lines.append(f"row {row} sums to {s!r} > 1 (first entry on line {first})")
        for (i, j, v) in report.negative_entries:
            lines.append(f"negative entry {v!r} at ({i}, {j}) on line {where.get((i, j))}")
        for (i, j, v) in report.nonfinite_entries:
            lines.append(f"non-finite entry at ({i}, {j}) on line {where.get((i, j))}")
        raise ChainFileError("; ".join(lines) or "invalid chain", path)
    if weight is not None and np.any(weight < 1):
        raise ChainFileError("weights must be >= 1", path)
    return AbsorbedChain(chain.matrix, weight=weight)


def _check_state(s, d, path, line):
    if not 0 <= s < d:
        raise ChainFileError(f"state {s} outside 0..{d - 1}", path, line)


def read_chain(path):
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ChainFileError(f"cannot read: {exc.strerror}", str(path)) from None
    return parse_chain(text, str(path))


def format_chain(chain):
    """Chain-file text for ``chain``; parsing it back gives the same matrix."""
    m = chain.matrix.tocoo()
    order = np.lexsort((m.col, m.row))
    lines = [f"qsd-chain v1 d={chain.d}"]
    for k in order:
        lines.append(f"{int(m.row[k])} {int(m.col[k])} {float(m.data[k])!r}")
    w = chain.weight
    if w is not None and np.any(w != 1):
        for s in np.flatnonzero(w != 1):
            lines.append(f"weight {int(s)} {float(w[s])!r}")
    return "\n".join(lines) + "\n"


def write_chain(chain, path):
    Path(path).write_text(format_chain(chain), encoding="utf-8")


def sha256_file(path):
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


# ------------------------------------------------------------------ reports

def to_jsonable(obj):
    """Plain JSON types; non-finite floats become strings."""
    if isinstance(obj, dict):
        return {str(k): to_jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [to_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return to_jsonable(obj.tolist())
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        if np.isfinite(x):
            return x
        return "inf" if x > 0 else ("-inf" if x < 0 else "nan")
    if obj is None or isinstance(obj, str):
        return obj
    raise TypeError(f"cannot serialize {type(obj).__name__}")


def dumps_report(report):
    """Deterministic JSON text (sorted keys, shortest round-trip floats)."""
    return json.dumps(to_jsonable(report), sort_keys=True, indent=1,
                      allow_nan=False) + "\n"


def schema_path():
    return Path(__file__).with_name("report.schema.json")


def load_schema():
    return json.loads(schema_path().read_text(encoding="utf-8"))
