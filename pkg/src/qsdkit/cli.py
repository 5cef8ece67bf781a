"""Command-line entry point: ``qsdkit <command> ...``.

Every command prints one JSON report on stdout.  Exit status is 0 when all
executed checks pass, 2 when a check fails and 1 on an input error.
"""

import argparse
import sys
import warnings

import numpy as np

from . import __version__
from .chain import validate
from .classes import find_classes, stratify
from .dsl import lyapunov_check, parse_rules, qsd_stability
from .errors import QsdError
from .fileio import SCHEMA_VERSION, dumps_report, read_chain, sha256_file
from .operators import run_batch
from .oracle import (check_limit, check_invariants, conditional_law,
                     monte_carlo_conditional, trace)
from .spectral import perron
from .synthesis import qsd_simplex, synthesize

MC_STEPS = 20
MIN_SURVIVORS = 10  # below this the normal approximation is meaningless
LAB_TOL = 1e-6
IDENTITY_TOL = 1e-10


class InputError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


def _status(ok):
    if ok is None:
        return "skipped"
    return "pass" if ok else "fail"


def _overall(statuses):
    statuses = list(statuses)
    if "fail" in statuses:
        return "fail"
    if statuses and all(s == "skipped" for s in statuses):
        return "skipped"
    return "pass"


def _provenance(args, inputs=(), seeds=None):
    argv = {k: v for k, v in sorted(vars(args).items()) if k != "func"}
    return {"version": __version__,
            "inputs": [{"path": str(p), "sha256": sha256_file(p)} for p in inputs],
            "seeds": seeds or {},
            "arguments": argv}


def _load(path):
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        chain = read_chain(path)
    return chain, [str(w.message) for w in caught]


def _classes_section(chain):
    graph = find_classes(chain)
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        spectra = [perron(chain, c) for c in graph.classes]
    theta = np.array([s.theta for s in spectra])
    if theta.max() > 0:
        graph = stratify(graph, theta)
    out = graph.as_dict()
    out.setdefault("theta", theta)
    out["spectra"] = [{"class": k, "theta": s.theta, "period": s.period, "gap": s.gap,
                       "slow": s.slow, "dead": s.dead, "residual": s.residual}
                      for k, s in enumerate(spectra)]
    out["warnings"] = list(out.get("warnings", [])) + [str(w.message) for w in caught]
    return graph, spectra, out


def _certificate_section(chain, cert):
    nu, eta, j = cert.on(chain.d)
    out = {"theta_bar": cert.theta_bar, "index_set": list(cert.index_set),
           "nu": nu, "eta": eta, "j": j, "optimal": cert.optimal,
           "envelope": cert.envelope.as_dict(), "weight": cert.weight,
           "steps": [dict(s) for s in cert.steps],
           "simplex_dimension": qsd_simplex(cert).dimension}
    if cert.j_lower is not None:
        full = np.zeros(chain.d, dtype=int)
        full[cert.support] = cert.j_lower
        out["j_lower"] = full
    return out


def cmd_analyze(args):
    chain, notes = _load(args.path)
    val = validate(chain).as_dict()
    val["status"] = _status(val["ok"])
    val["warnings"] = notes
    _, _, classes = _classes_section(chain)
    return {"command": "analyze", "validation": val, "classes": classes,
            "status": val["status"], "provenance": _provenance(args, [args.path])}


def cmd_qsd(args):
    chain, notes = _load(args.path)
    val = validate(chain).as_dict()
    val["status"] = _status(val["ok"])
    val["warnings"] = notes
    _, _, classes = _classes_section(chain)
    cert = synthesize(chain)
    return {"command": "qsd", "validation": val, "classes": classes,
            "certificate": _certificate_section(chain, cert),
            "status": val["status"], "provenance": _provenance(args, [args.path])}


def cmd_verify(args):
    report = cmd_qsd(args)
    report["command"] = "verify"
    chain, _ = _load(args.path)
    cert = synthesize(chain)
    _, _, j = cert.on(chain.d)
    tr = trace(chain, cert, n_max=args.n)
    ver = {"trace": tr.as_dict()}
    ver["theta_hat"] = ver["trace"]["theta_hat"]
    ver["j_hat"] = ver["trace"]["j_hat"]
    j_checks = []
    for x, e in enumerate(tr.j_hat):
        if e.subleading:
            j_checks.append("skipped")
        else:
            j_checks.append(_status(not e.flagged and e.j == j[x]))
    ver["j_agreement"] = {"per_state": j_checks, "status": _overall(j_checks)}
    inv = check_invariants(chain, cert)
    ver["invariants"] = inv.as_dict()
    limits = [check_limit(chain, cert, x=x, n_max=min(args.n, 400)) for x in range(chain.d)]
    ver["limits"] = [lc.as_dict() for lc in limits]
    mc = []
    for x in range(chain.d):
        entry = {"state": x, "n": MC_STEPS}
        if args.samples <= 0:
            entry["status"] = "skipped"
        else:
            mu = np.zeros(chain.d)
            mu[x] = 1.0
            exact = conditional_law(chain, mu, MC_STEPS).law
            try:
                law = monte_carlo_conditional(chain, x, MC_STEPS, args.samples, args.seed)
            except QsdError as exc:
                entry.update(status="skipped", detail=str(exc))
            else:
                if law.survivors < MIN_SURVIVORS:
                    entry.update(law.as_dict(), status="skipped",
                                 detail=f"only {law.survivors} survivors")
                    mc.append(entry)
                    continue
                ok, z = law.agrees_with(exact)
                entry.update(law.as_dict(), exact=exact, z=np.where(np.isfinite(z), z, 0.0),
                             status=_status(ok))
        mc.append(entry)
    ver["monte_carlo"] = mc
    statuses = ([ver["j_agreement"]["status"]]
                + [c["status"] for c in ver["invariants"].values()]
                + [lc["status"] for lc in ver["limits"]]
                + [e["status"] for e in mc])
    ver["status"] = _overall(statuses)
    report["verification"] = ver
    report["status"] = _overall([report["status"], ver["status"]])
    report["provenance"] = _provenance(args, [args.path], {"monte_carlo": args.seed})
    return report


def cmd_operator_lab(args):
    rows = run_batch(args.case, seed=args.seed, instances=args.instances)
    for r in rows:
        r["status"] = _status(r["error"] <= LAB_TOL and r["fitted_J"] == r["predicted_J"]
                              and max(r["ME-E"], r["EM-E"]) <= IDENTITY_TOL)
    summary = {"case": args.case, "instances": args.instances,
               "max_error": max((r["error"] for r in rows), default=0.0),
               "max_identity": max((max(r["ME-E"], r["EM-E"]) for r in rows), default=0.0),
               "j_mismatches": sum(r["fitted_J"] != r["predicted_J"] for r in rows),
               "rows": rows}
    summary["status"] = _overall(r["status"] for r in rows)
    return {"command": "operator-lab", "operator_lab": summary, "status": summary["status"],
            "provenance": _provenance(args, seeds={"operator_lab": args.seed})}


def cmd_lyapunov(args):
    try:
        text = open(args.rules, encoding="utf-8").read()
    except OSError as exc:
        raise InputError(f"{args.rules}: cannot read: {exc.strerror}") from None
    rules = parse_rules(text)
    Ns = sorted(set(args.N))
    if len(Ns) < 2:
        raise InputError("--N needs at least two distinct sizes")
    lyap = lyapunov_check(rules, args.V, Ns[-2], Ns[-1])
    stab = qsd_stability(rules, args.V, Ns)
    out_l = lyap.as_dict()
    out_l["ratio_window_start"] = Ns[-2] // 2
    out_s = stab.as_dict()
    status = _overall([out_l["status"], out_s["status"]])
    summary = ("consistent with existence of a limiting quasi-stationary distribution"
               if status == "pass" else "not consistent with the drift criterion")
    return {"command": "lyapunov", "lyapunov": out_l, "stability": out_s,
            "summary": summary, "status": status,
            "provenance": _provenance(args, [args.rules])}


def _sizes(text):
    try:
        out = [int(s) for s in text.split(",") if s.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}")
    if not out or min(out) < 1:
        raise argparse.ArgumentTypeError("sizes must be positive")
    return out


def build_parser():
    p = _Parser(prog="qsdkit", description="Quasi-stationary structure of absorbed chains.")
    p.add_argument("--version", action="version", version=__version__)
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    a = sub.add_parser("analyze", help="classes and per-class spectra")
    a.add_argument("path")
    a.set_defaults(func=cmd_analyze)

    q = sub.add_parser("qsd", help="full certificate")
    q.add_argument("path")
    q.set_defaults(func=cmd_qsd)

    v = sub.add_parser("verify", help="certificate plus oracle and Monte Carlo checks")
    v.add_argument("path")
    v.add_argument("--n", type=int, default=4000, help="oracle horizon")
    v.add_argument("--samples", type=int, default=100_000, help="Monte Carlo trajectories (0 skips)")
    v.add_argument("--seed", type=int, default=0)
    v.set_defaults(func=cmd_verify)

    o = sub.add_parser("operator-lab", help="random operator composition batch")
    o.add_argument("--case", type=int, choices=(1, 2, 3), required=True)
    o.add_argument("--seed", type=int, default=0)
    o.add_argument("--instances", type=int, default=100)
    o.set_defaults(func=cmd_operator_lab)

    ly = sub.add_parser("lyapunov", help="drift criterion and truncation stability")
    ly.add_argument("rules")
    ly.add_argument("--V", default=None, help="weight expression (default: the file's V line)")
    ly.add_argument("--N", type=_sizes, default=[100, 200, 400], help="truncation sizes, e.g. 100,200,400")
    ly.set_defaults(func=cmd_lyapunov)
    return p


def main(argv=None):
    try:
        args = build_parser().parse_args(argv)
    except SystemExit as exc:   # --help, --version, or malformed flags
        return exc.code
    if getattr(args, "n", None) is not None and args.n < 2:
        print("qsdkit: error: --n must be at least 2", file=sys.stderr)
        return 1
    try:
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            report = args.func(args)
    except (QsdError, InputError, OSError, ValueError) as exc:
        print(f"qsdkit: error: {exc}", file=sys.stderr)
        return 1
    report = {"schema_version": SCHEMA_VERSION, **report}
    sys.stdout.write(dumps_report(report))
    return 0 if report["status"] != "fail" else 2


if __name__ == "__main__":
    sys.exit(main())
