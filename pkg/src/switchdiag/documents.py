"""JSON documents for systems, certificates and reports.

Floats are written with ``repr`` (shortest string that round-trips the
double), matrices as nested row arrays. ``dumps`` is deterministic: sorted
keys, two-space indent, numeric vectors kept on one line.
"""

import json
import math
from pathlib import Path

import numpy as np

from .analyzer import AnalysisReport, TheoremOutcome
from .certificate import (
    CommonDiagonalCertificate,
    SwitchedDiagonalCertificate,
    SwitchedL1Certificate,
    VerificationReport,
)
from .feasibility import CoupledWitness, ScalingWitness, SelectionReport
from .system import InvalidSystemError, ModelKind, SwitchedDelaySystem

SCHEMA_VERSION = 1


class DocumentError(ValueError):
    pass


def _is_flat(value):
    return isinstance(value, list) and all(isinstance(v, (int, float, bool)) or v is None for v in value)


def _scalar(value):
    if value is None:
        return "null"
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, int):
        return str(value)
    if isinstance(value, float):
        if not math.isfinite(value):
            raise DocumentError(f"cannot serialize non-finite number {value!r}")
        return repr(value)
    return json.dumps(value, ensure_ascii=False)


def _emit(value, indent, out):
    pad = "  " * indent
    if isinstance(value, dict):
        if not value:
            out.append("{}")
            return
        out.append("{\n")
        items = sorted(value.items())
        for i, (k, v) in enumerate(items):
            out.append(f"{pad}  {json.dumps(str(k), ensure_ascii=False)}: ")
            _emit(v, indent + 1, out)
            out.append(",\n" if i < len(items) - 1 else "\n")
        out.append(pad + "}")
    elif isinstance(value, list):
        if _is_flat(value):
            out.append("[" + ", ".join(_scalar(v) for v in value) + "]")
            return
        out.append("[\n")
        for i, v in enumerate(value):
            out.append(pad + "  ")
            _emit(v, indent + 1, out)
            out.append(",\n" if i < len(value) - 1 else "\n")
        out.append(pad + "]")
    else:
        out.append(_scalar(value))


def to_plain(obj):
    """Convert numpy values, enums and tuples to JSON-ready Python objects."""
    if isinstance(obj, dict):
        return {str(k): to_plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [to_plain(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return to_plain(obj.tolist())
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        return x if math.isfinite(x) else None
    if hasattr(obj, "value") and isinstance(getattr(obj, "value"), str):
        return obj.value
    return obj


def dumps(doc):
    out = []
    _emit(to_plain(doc), 0, out)
    return "".join(out) + "\n"


def loads(text):
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise DocumentError(f"malformed JSON at line {exc.lineno}, column {exc.colno}: {exc.msg}") from exc


def _read(path):
    try:
        return Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise DocumentError(f"cannot read {path}: {exc.strerror or exc}") from exc


# systems


def _numeric_array(value, where):
    try:
        arr = np.array(value, dtype=np.float64)
    except (TypeError, ValueError) as exc:
        raise DocumentError(f"{where} is not a rectangular numeric array") from exc
    if arr.dtype == object:
        raise DocumentError(f"{where} is not a rectangular numeric array")
    return arr


def _find_negative(arr, label):
    bad = np.argwhere(arr < 0)
    if bad.size:
        idx = "".join(f"[{int(i)}]" for i in bad[0])
        raise DocumentError(f"{label}{idx} = {float(arr[tuple(bad[0])])!r} is negative")


def system_from_doc(doc):
    if not isinstance(doc, dict):
        raise DocumentError("system document must be a JSON object")
    missing = [k for k in ("schema_version", "n", "N", "l", "model", "A", "B") if k not in doc]
    if missing:
        raise DocumentError("system document is missing " + ", ".join(missing))
    if doc["schema_version"] != SCHEMA_VERSION:
        raise DocumentError(f"unsupported schema_version {doc['schema_version']!r}")
    n, N, l = doc["n"], doc["N"], doc["l"]
    for key, val in (("n", n), ("N", N), ("l", l)):
        if not isinstance(val, int) or isinstance(val, bool) or val < 1:
            raise DocumentError(f"{key} must be a positive integer")
    try:
        model = ModelKind(doc["model"])
    except ValueError as exc:
        raise DocumentError(f"unknown model kind {doc['model']!r}") from exc
    A = _numeric_array(doc["A"], "A")
    B = _numeric_array(doc["B"], "B")
    _find_negative(A, "A")
    _find_negative(B, "B")
    if A.shape != (N, n, n):
        raise DocumentError(f"A has shape {A.shape}, expected ({N}, {n}, {n})")
    if B.shape == (N, n, n):
        full = np.zeros((l, N, n, n))
        full[l - 1] = B
    elif B.shape == (l, N, n, n):
        full = B
    else:
        raise DocumentError(f"B has shape {B.shape}, expected ({N}, {n}, {n}) or ({l}, {N}, {n}, {n})")
    meta = doc.get("metadata") or {}
    try:
        return SwitchedDelaySystem(A, full, model, str(meta.get("name", "")), str(meta.get("source", "")))
    except InvalidSystemError as exc:
        raise DocumentError(str(exc)) from exc


def system_to_doc(sys):
    B = sys.delay_blocks if sys.is_single_delay else sys.B
    doc = {
        "schema_version": SCHEMA_VERSION,
        "n": sys.n,
        "N": sys.N,
        "l": sys.l,
        "model": sys.model.value,
        "A": sys.A,
        "B": B,
    }
    if sys.name or sys.source:
        doc["metadata"] = {"name": sys.name, "source": sys.source}
    return to_plain(doc)


def parse_system(path):
    return system_from_doc(loads(_read(path)))


def parse_system_text(text):
    return system_from_doc(loads(text))


# witnesses and analysis


def witness_to_doc(w):
    if w is None:
        return None
    if isinstance(w, ScalingWitness):
        return {"lambda": w.lam, "v": w.v, "slack": w.slack}
    if isinstance(w, CoupledWitness):
        return {"mu": w.mu, "d_family": w.d_family, "slack": w.slack, "variant": w.variant}
    if isinstance(w, SelectionReport):
        return {"rho_max": w.rho_max, "argmax": list(w.argmax), "count": w.count}
    if isinstance(w, dict):
        return {k: witness_to_doc(v) for k, v in w.items()}
    return w


def outcome_to_doc(o: TheoremOutcome):
    return {
        "theorem": o.theorem_id,
        "status": o.status.value,
        "reason": o.reason,
        "numbers": o.numbers,
        "witness": witness_to_doc(o.witness),
    }


def report_to_doc(report: AnalysisReport, version, extra=None):
    doc = {
        "schema_version": SCHEMA_VERSION,
        "kind": "analysis-report",
        "tool": {"name": "switchdiag", "version": version},
        "tolerances": {"tol": report.tol},
        "system": report.system,
        "outcomes": [outcome_to_doc(o) for o in report.outcomes],
        "strongest_conclusion": report.strongest_conclusion.value,
        "notes": report.notes,
    }
    if extra:
        doc.update(extra)
    return to_plain(doc)


# certificates


def certificate_to_doc(cert):
    base = {
        "schema_version": SCHEMA_VERSION,
        "kind": "certificate",
        "functional_form": cert.functional_form,
        "l": cert.l,
        "theta": cert.theta,
        "mu": cert.mu,
        "lambda": cert.lam,
        "delta": cert.delta,
    }
    if isinstance(cert, CommonDiagonalCertificate):
        base.update(
            certificate_type="common-extended" if cert.extended else "common",
            P=cert.P,
            d=cert.d,
        )
        if cert.extended:
            base["Q_m"] = [np.diag(q) for q in cert.q_delays]
        else:
            base.update(Q=cert.Q, epsilon=cert.epsilon)
    elif isinstance(cert, SwitchedDiagonalCertificate):
        base.update(
            certificate_type="switched",
            P_family=cert.P_family,
            Q_tilde=cert.Q_tilde,
            epsilon=cert.epsilon,
            d_family=cert.d_family,
        )
    elif isinstance(cert, SwitchedL1Certificate):
        base.update(
            certificate_type="switched-l1",
            P_family=cert.P_family,
            Q_family=cert.Q_family,
            d_family=cert.d_family,
        )
    else:
        raise DocumentError(f"not a certificate: {type(cert).__name__}")
    return to_plain(base)


def _diag(value, where):
    M = _numeric_array(value, where)
    if M.ndim != 2 or M.shape[0] != M.shape[1]:
        raise DocumentError(f"{where} must be a square matrix")
    if np.any(M[~np.eye(M.shape[0], dtype=bool)] != 0):
        raise DocumentError(f"{where} has nonzero off-diagonal entries")
    return np.diag(M).copy()


def _diags(value, where):
    return np.array([_diag(m, f"{where}[{i}]") for i, m in enumerate(value)])


def _field(doc, key):
    if key not in doc:
        raise DocumentError(f"certificate document is missing {key!r}")
    return doc[key]


def certificate_from_doc(doc):
    if not isinstance(doc, dict) or doc.get("kind") != "certificate":
        raise DocumentError("not a certificate document")
    kind = _field(doc, "certificate_type")
    theta = _numeric_array(_field(doc, "theta"), "theta")
    common = dict(
        theta=theta,
        mu=float(_field(doc, "mu")),
        lam=float(_field(doc, "lambda")),
        delta=float(_field(doc, "delta")),
    )
    form = _field(doc, "functional_form")
    l = int(_field(doc, "l"))
    if kind == "common":
        return CommonDiagonalCertificate(
            p=_diag(_field(doc, "P"), "P"),
            q=_diag(_field(doc, "Q"), "Q"),
            epsilon=float(_field(doc, "epsilon")),
            l=l,
            functional_form=form,
            d=_numeric_array(_field(doc, "d"), "d"),
            **common,
        )
    if kind == "common-extended":
        q_delays = _diags(_field(doc, "Q_m"), "Q_m")
        return CommonDiagonalCertificate(
            p=_diag(_field(doc, "P"), "P"),
            q=q_delays[-1].copy(),
            epsilon=0.0,
            l=l,
            functional_form=form,
            d=_numeric_array(_field(doc, "d"), "d"),
            q_delays=q_delays,
            **common,
        )
    if kind == "switched":
        return SwitchedDiagonalCertificate(
            p_family=_diags(_field(doc, "P_family"), "P_family"),
            q_tilde=_diag(_field(doc, "Q_tilde"), "Q_tilde"),
            epsilon=float(_field(doc, "epsilon")),
            l=l,
            functional_form=form,
            d_family=_numeric_array(_field(doc, "d_family"), "d_family"),
            **common,
        )
    if kind == "switched-l1":
        if l != 1:
            raise DocumentError("switched-l1 certificates require l = 1")
        return SwitchedL1Certificate(
            p_family=_diags(_field(doc, "P_family"), "P_family"),
            q_modes=_diags(_field(doc, "Q_family"), "Q_family"),
            d_family=_numeric_array(_field(doc, "d_family"), "d_family"),
            functional_form=form,
            **common,
        )
    raise DocumentError(f"unknown certificate_type {kind!r}")


def verification_to_doc(rep: VerificationReport):
    def key(idx):
        return ",".join(str(i + 1) for i in idx)

    return to_plain(
        {
            "accepted": rep.accepted,
            "alpha": rep.alpha,
            "beta": rep.beta,
            "margins": {key(k): v for k, v in rep.margins.items()},
            "metzler_check": {key(k): v for k, v in rep.metzler_check.items()},
            "failures": rep.failures,
            "extended_construction": rep.extended,
        }
    )


def parse_certificates(path):
    """A single certificate document or a bundle with a ``certificates`` list."""
    doc = loads(_read(path))
    if isinstance(doc, dict) and doc.get("kind") == "certificate-bundle":
        entries = doc.get("certificates")
        if not isinstance(entries, list):
            raise DocumentError("certificate bundle must hold a list under 'certificates'")
        return [(e.get("theorem", f"#{i + 1}"), certificate_from_doc(e.get("certificate"))) for i, e in enumerate(entries)]
    return [("certificate", certificate_from_doc(doc))]


__all__ = [
    "DocumentError",
    "SCHEMA_VERSION",
    "dumps",
    "loads",
    "to_plain",
    "parse_system",
    "parse_system_text",
    "system_from_doc",
    "system_to_doc",
    "report_to_doc",
    "outcome_to_doc",
    "witness_to_doc",
    "certificate_to_doc",
    "certificate_from_doc",
    "verification_to_doc",
    "parse_certificates",
]
