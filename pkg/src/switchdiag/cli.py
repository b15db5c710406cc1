"""Command-line entry point: ``switchdiag <command> ...``.

Exit codes: 0 success or the analyzed property holds, 1 analyzed but fails
or a certificate is rejected, 2 input error, 3 numerical failure.
"""

import argparse
import datetime
import io
import math
import sys as _sys
from fractions import Fraction

import numpy as np

from . import __version__
from ._accel import backend_name
from .analyzer import Conclusion, analyze_all
from .certificate import (
    CertificateError,
    synthesize_common,
    synthesize_extended,
    synthesize_switched,
    synthesize_switched_l1,
    verify_certificate,
)
from .documents import (
    DocumentError,
    certificate_to_doc,
    dumps,
    parse_certificates,
    parse_system,
    report_to_doc,
    verification_to_doc,
)
from .feasibility import PROP4, DEFAULT_TOL, FeasibilityError, common_sets, coupled_slack, row_selection_report
from .linalg import ConvergenceError, LinalgError
from .simulator import (
    InputSignal,
    Nonlinearity,
    SimulationError,
    SwitchingSignal,
    simulate,
    write_trajectory_csv,
)
from .system import InvalidSystemError, paper_example

EXIT_OK = 0
EXIT_FAILS = 1
EXIT_INPUT = 2
EXIT_NUMERICAL = 3

# the reference d-family quoted with the worked example at a = 9/4
REFERENCE_MU = 1.152
REFERENCE_D_FAMILY = ((1.179, 0.5), (1.3, 1.0))

# closed forms derived for the worked example at the two tabulated parameters
CLOSED_FORMS = {
    Fraction(2): {
        "lambda": ("(1+sqrt(6))/4", (1 + math.sqrt(6)) / 4),
        "mu": ("(2+sqrt(6))/4", (2 + math.sqrt(6)) / 4),
    },
    Fraction(9, 4): {
        "lambda": ("(13+sqrt(217))/32", (13 + math.sqrt(217)) / 32),
        "mu": ("(17+sqrt(385))/32", (17 + math.sqrt(385)) / 32),
    },
}


class InputError(ValueError):
    pass


def _emit(text, path, out):
    if path:
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
    else:
        out.write(text)


def _meta(args):
    extra = {}
    if not args.canonical:
        extra["generated_at"] = datetime.datetime.now(datetime.timezone.utc).isoformat(timespec="seconds")
        extra["backend"] = backend_name()
    return extra


def _exit_for(report):
    return EXIT_FAILS if report.strongest_conclusion is Conclusion.UNDECIDED else EXIT_OK


def cmd_analyze(args, out):
    system = parse_system(args.system)
    report = analyze_all(system, args.tol)
    doc = report_to_doc(report, __version__, _meta(args))
    _emit(dumps(doc), args.report, out)
    return _exit_for(report)


def _certificates(system, report):
    """(theorem, certificate) for every holding theorem that has a construction."""
    certs = []
    t4 = report.outcome("T4")
    if t4.holds:
        w = t4.witness
        certs.append(("T4", synthesize_common(system, w["d"].v, w["theta"].v, w["d"].lam, w["theta"].lam)))
    t6 = report.outcome("T6")
    if t6.holds and not system.is_single_delay:
        w = t6.witness
        certs.append(("T6", synthesize_extended(system, w["d"].v, w["theta"].v, w["d"].lam, w["theta"].lam)))
    t7 = report.outcome("T7")
    if t7.holds:
        w = t7.witness
        certs.append(("T7", synthesize_switched(system, w["d_family"].d_family, w["theta"].v, w["d_family"].mu, w["theta"].lam)))
    p4 = report.outcome("P4")
    if p4.holds:
        w = p4.witness
        certs.append(("P4", synthesize_switched_l1(system, w["d_family"].d_family, w["theta"].v, w["d_family"].mu, w["theta"].lam)))
    return certs


def cmd_certify(args, out):
    system = parse_system(args.system)
    report = analyze_all(system, args.tol)
    certs = _certificates(system, report)
    entries = []
    for tid, cert in certs:
        ver = verify_certificate(system, cert)
        entries.append({"theorem": tid, "certificate": certificate_to_doc(cert), "verification": verification_to_doc(ver)})
    doc = {
        "schema_version": 1,
        "kind": "certificate-bundle",
        "tool": {"name": "switchdiag", "version": __version__},
        "tolerances": {"tol": args.tol},
        "system": system.summary(),
        "certificates": entries,
    }
    doc.update(_meta(args))
    _emit(dumps(doc), args.report, out)
    return EXIT_OK if entries else EXIT_FAILS


def cmd_verify(args, out):
    system = parse_system(args.system)
    try:
        certs = parse_certificates(args.certificate)
    except (TypeError, ValueError) as exc:
        raise InputError(str(exc)) from exc
    results = []
    accepted = True
    for label, cert in certs:
        rep = verify_certificate(system, cert)
        accepted &= rep.accepted
        results.append({"label": label, **verification_to_doc(rep)})
    doc = {"schema_version": 1, "kind": "verification-report", "accepted": accepted, "results": results}
    doc.update(_meta(args))
    _emit(dumps(doc), args.report, out)
    return EXIT_OK if accepted else EXIT_FAILS


def _parse_switching(text, seed, N):
    name, _, arg = text.partition(":")
    try:
        if name == "fixed":
            s = int(arg or 1)
            if not 1 <= s <= N:
                raise InputError(f"fixed mode {s} outside 1..{N}")
            return SwitchingSignal.fixed(s - 1)
        if name == "periodic":
            pattern = [int(p) for p in arg.replace("-", ",").split(",") if p]
            if not pattern or min(pattern) < 1 or max(pattern) > N:
                raise InputError(f"periodic pattern must list modes in 1..{N}")
            return SwitchingSignal.periodic([p - 1 for p in pattern])
    except ValueError as exc:
        raise InputError(f"bad switching spec {text!r}") from exc
    if name == "random" and not arg:
        return SwitchingSignal.random(seed)
    if name == "adversarial" and not arg:
        return SwitchingSignal.adversarial()
    raise InputError(f"unknown switching spec {text!r}")


def _parse_input(text, seed):
    name, _, arg = text.partition(":")
    try:
        if name == "zero" and not arg:
            return InputSignal.zero()
        if name == "constant":
            return InputSignal.constant([float(v) for v in arg.split(",")])
        if name == "random":
            return InputSignal.bounded_random(float(arg), seed)
    except ValueError as exc:
        raise InputError(f"bad input spec {text!r}") from exc
    raise InputError(f"unknown input spec {text!r}")


def _parse_init(text, system):
    size = (system.l + 1) * system.n
    if text is None:
        return np.ones((system.l + 1, system.n))
    try:
        vals = [float(v) for v in text.split(",")]
    except ValueError as exc:
        raise InputError(f"bad --init values {text!r}") from exc
    if len(vals) != size:
        raise InputError(f"--init needs {size} values (x(0), x(-1), ..., x(-l)), got {len(vals)}")
    return np.array(vals).reshape(system.l + 1, system.n)


def cmd_simulate(args, out):
    system = parse_system(args.system)
    try:
        f = Nonlinearity.parse(args.f)
    except SimulationError as exc:
        raise InputError(str(exc)) from exc
    signal = _parse_switching(args.switching, args.seed, system.N)
    inp = _parse_input(args.input, args.seed)
    init = _parse_init(args.init, system)
    cert = None
    if args.certificate:
        certs = parse_certificates(args.certificate)
        cert = certs[0][1]
        rep = verify_certificate(system, cert)
        if not rep.accepted:
            raise InputError("certificate does not verify against this system: " + "; ".join(rep.failures))
    traj = simulate(system, f, signal, inp, init, args.steps, cert)
    buf = io.StringIO(newline="")
    write_trajectory_csv(traj, buf)
    _emit(buf.getvalue(), args.report, out)
    return EXIT_OK


def _selection_doc(report, labels):
    return {
        "rho_max": report.rho_max,
        "count": report.count,
        "argmax": [{"row": i + 1, "member": labels[k]} for i, k in enumerate(report.argmax)],
    }


def cmd_spectral(args, out):
    system = parse_system(args.system)
    if not system.is_single_delay:
        raise InputError("spectral report needs a single delay block per mode")
    m1, m2 = common_sets(system)
    N = system.N
    labels1 = [f"(A{s + 1}+B{r + 1})^T" for s in range(N) for r in range(N)]
    labels2 = [f"A{s + 1}+B{s + 1}" for s in range(N)]
    r1 = row_selection_report(m1)
    r2 = row_selection_report(m2)
    doc = {
        "schema_version": 1,
        "kind": "spectral-report",
        "system": system.summary(),
        "rho1": _selection_doc(r1, labels1),
        "rho2": _selection_doc(r2, labels2),
        "product": r1.rho_max * r2.rho_max,
    }
    doc.update(_meta(args))
    _emit(dumps(doc), args.report, out)
    return EXIT_OK


def _parse_a(text):
    try:
        a = Fraction(text)
    except (ValueError, ZeroDivisionError) as exc:
        raise InputError(f"bad parameter a = {text!r}") from exc
    if a <= 0:
        raise InputError("parameter a must be positive")
    return a


def _row(label, value, closed=None):
    line = f"  {label:<34} {value!r:<22}"
    if closed:
        form, exact = closed
        line += f" = {form} ~ {exact!r} (diff {abs(value - exact):.1e})"
    return line + "\n"


def cmd_paper_example(args, out):
    a = _parse_a(args.a)
    system = paper_example(float(a))
    report = analyze_all(system, args.tol)
    closed = CLOSED_FORMS.get(a, {})
    t2, t4, t7, p4 = (report.outcome(t) for t in ("T2", "T4", "T7", "P4"))
    t3 = report.outcome("T3")
    lines = [f"two-mode example, n = 2, l = 1, a = {a} ({float(a)!r})\n", "thresholds\n"]
    lines.append(_row("lambda* (minimal theta scaling)", t4.numbers["lambda"], closed.get("lambda")))
    lines.append(_row("mu* (minimal d scaling)", t4.numbers["mu"], closed.get("mu")))
    lines.append(_row("rho2 (row selections)", t3.numbers["rho2"], closed.get("lambda")))
    lines.append(_row("rho1 (row selections)", t3.numbers["rho1"], closed.get("mu")))
    lines.append(_row("lambda* mu*", t4.numbers["product"]))
    lines.append(_row("mu* coupled, mode-indexed weights", p4.numbers["mu"]))
    lines.append(_row("mu* coupled, shared weights", t7.numbers["mu"]))
    lines.append("verdicts\n")
    for o in (t2, t4, t7, p4):
        extra = f" (product {o.numbers['product']:.6f})" if "product" in o.numbers else ""
        lines.append(f"  {o.theorem_id:<4} {o.status.value}{extra}\n")
    if a == Fraction(9, 4):
        slack = coupled_slack(system, REFERENCE_MU, np.array(REFERENCE_D_FAMILY), PROP4)
        lam = t4.numbers["lambda"]
        lines.append("reference d-family d1 = (1.179, 0.5), d2 = (1.3, 1) at mu = 1.152\n")
        lines.append(f"  coupled slack {slack!r} ({'feasible' if slack >= 0 else 'infeasible'})\n")
        lines.append(f"  lambda* x 1.152 = {lam * REFERENCE_MU!r}\n")
    lines.append(f"conclusion: {report.strongest_conclusion.value}\n")
    if t4.holds:
        lines.append("common certificate available\n")
    elif p4.holds or t7.holds:
        lines.append("switched certificate available\n")
    _emit("".join(lines), args.report, out)
    return _exit_for(report)


def _tol(text):
    try:
        tol = float(text)
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"bad tolerance {text!r}") from exc
    if not tol > 0:
        raise argparse.ArgumentTypeError("tolerance must be positive")
    return tol


def build_parser():
    parser = argparse.ArgumentParser(prog="switchdiag", description="Diagonal stability analysis of switched positive delay systems.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--tol", type=_tol, default=DEFAULT_TOL, help="bisection and verdict tolerance (default 1e-9)")
    common.add_argument("--report", metavar="PATH", help="write output to PATH instead of stdout")
    common.add_argument("--canonical", action="store_true", help="omit timestamp and backend from documents")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("analyze", parents=[common], help="run every theorem check and emit a JSON report")
    p.add_argument("system")
    p.set_defaults(func=cmd_analyze)

    p = sub.add_parser("certify", parents=[common], help="emit certificates for every theorem that holds")
    p.add_argument("system")
    p.set_defaults(func=cmd_certify)

    p = sub.add_parser("verify", parents=[common], help="re-check a certificate document against a system")
    p.add_argument("certificate")
    p.add_argument("system")
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("simulate", parents=[common], help="simulate and print a CSV trajectory")
    p.add_argument("system")
    p.add_argument("--steps", type=int, default=100)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--f", default="identity", help="identity | tanh | saturation[:L] | rational | scaled:<c>")
    p.add_argument(
        "--switching",
        default="random",
        help="fixed:<s> | periodic:<pat> | random | adversarial; modes are 1-based, <pat> is comma-separated",
    )
    p.add_argument("--input", default="zero", help="zero | constant:<v>[,<v>...] | random:<amp>")
    p.add_argument("--init", help="comma-separated x(0), x(-1), ..., x(-l); default all ones")
    p.add_argument("--certificate", metavar="PATH", help="certificate document whose functional is recorded as V")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("spectral", parents=[common], help="row-selection spectral radii rho1, rho2")
    p.add_argument("system")
    p.set_defaults(func=cmd_spectral)

    p = sub.add_parser("paper-example", parents=[common], help="threshold table of the two-mode example")
    p.add_argument("--a", default="2", help="parameter a > 0, decimal or fraction such as 9/4")
    p.set_defaults(func=cmd_paper_example)
    return parser


def main(argv=None, out=None, err=None):
    out = _sys.stdout if out is None else out
    err = _sys.stderr if err is None else err
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    if getattr(args, "steps", 1) < 1:
        print("switchdiag: --steps must be at least 1", file=err)
        return EXIT_INPUT
    try:
        return args.func(args, out)
    except (InputError, DocumentError, InvalidSystemError, CertificateError, SimulationError) as exc:
        print(f"switchdiag: input error: {exc}", file=err)
        return EXIT_INPUT
    except (ConvergenceError, FeasibilityError, LinalgError, FloatingPointError) as exc:
        print(f"switchdiag: numerical error: {exc}", file=err)
        return EXIT_NUMERICAL
    except OSError as exc:
        print(f"switchdiag: {exc}", file=err)
        return EXIT_INPUT


if __name__ == "__main__":
    _sys.exit(main())
