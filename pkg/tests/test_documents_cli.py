import io
import json
import math
import subprocess
import sys as _sys
from importlib import resources

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from conftest import LAMBDA_A2, MU_A2, random_system
from switchdiag.analyzer import analyze_all
from switchdiag.certificate import (
    SwitchedDiagonalCertificate,
    SwitchedL1Certificate,
    synthesize_common,
    synthesize_extended,
    verify_certificate,
)
from switchdiag.cli import EXIT_FAILS, EXIT_INPUT, EXIT_OK, _certificates, main
from switchdiag.documents import (
    DocumentError,
    certificate_from_doc,
    certificate_to_doc,
    dumps,
    loads,
    parse_system,
    parse_system_text,
    report_to_doc,
    system_to_doc,
)
from switchdiag.system import ModelKind, SwitchedDelaySystem, paper_example

FIXTURE = str(resources.files("switchdiag") / "data" / "paper_a2.json")
seeds = st.integers(0, 2**32 - 1)


def run(*argv):
    out, err = io.StringIO(), io.StringIO()
    code = main(list(argv), out, err)
    return code, out.getvalue(), err.getvalue()


def _doc(**overrides):
    doc = {
        "schema_version": 1,
        "n": 2,
        "N": 1,
        "l": 1,
        "model": "persidskii",
        "A": [[[0.1, 0.0], [0.0, 0.1]]],
        "B": [[[0.0, 0.2], [0.0, 0.0]]],
    }
    doc.update(overrides)
    return json.dumps(doc)


# -- system documents --------------------------------------------------------


def test_fixture_is_the_worked_example():
    sys = parse_system(FIXTURE)
    ref = paper_example(2)
    assert np.array_equal(sys.A, ref.A) and np.array_equal(sys.B, ref.B)
    assert sys.model is ModelKind.PERSIDSKII and sys.l == 1


def test_negative_entry_names_its_index():
    text = _doc(A=[[[0.1, 0.0], [-0.1, 0.1]]])
    with pytest.raises(DocumentError, match=r"A\[0\]\[1\]\[0\] = -0.1 is negative"):
        parse_system_text(text)


def test_multi_delay_document():
    B = [[[[0.1, 0.0], [0.0, 0.1]]], [[[0.0, 0.2], [0.0, 0.0]]]]
    sys = parse_system_text(_doc(l=2, B=B))
    assert sys.l == 2 and not sys.is_single_delay
    assert sys.B[1, 0, 0, 1] == 0.2


def test_single_delay_blocks_sit_at_the_maximal_delay():
    sys = parse_system_text(_doc(l=3))
    assert sys.is_single_delay and sys.l == 3
    assert sys.B[2, 0, 0, 1] == 0.2 and not np.any(sys.B[:2])


@pytest.mark.parametrize(
    "override, message",
    [
        ({"A": [[[0.1, 0.0], [0.0]]]}, "rectangular"),
        ({"n": 3}, "shape"),
        ({"model": "hybrid"}, "model kind"),
        ({"schema_version": 7}, "schema_version"),
        ({"N": 0}, "positive integer"),
        ({"A": [[[0.1, float("nan")], [0.0, 0.1]]]}, "non-finite"),
    ],
)
def test_malformed_documents(override, message):
    with pytest.raises(DocumentError, match=message):
        parse_system_text(_doc(**override))


def test_missing_keys_and_bad_json():
    with pytest.raises(DocumentError, match="missing"):
        parse_system_text('{"schema_version": 1}')
    with pytest.raises(DocumentError, match="line 1, column"):
        parse_system_text('{"n": ')


def test_fixture_round_trip_is_byte_identical():
    text = open(FIXTURE, encoding="utf-8").read()
    once = dumps(system_to_doc(parse_system_text(text)))
    assert once == text
    assert dumps(system_to_doc(parse_system_text(once))) == once


@given(seeds, st.integers(1, 3), st.integers(1, 3), st.integers(1, 3), st.sampled_from(list(ModelKind)))
def test_system_round_trip(seed, n, N, l, model):
    rng = np.random.default_rng(seed)
    B = rng.uniform(0, 1, (l, N, n, n)) * (rng.uniform() < 0.5)
    sys = SwitchedDelaySystem(rng.uniform(0, 1, (N, n, n)), B, model)
    text = dumps(system_to_doc(sys))
    back = parse_system_text(text)
    assert np.array_equal(back.A, sys.A) and np.array_equal(back.B, sys.B)
    assert dumps(system_to_doc(back)) == text


def test_report_round_trip_is_byte_identical(sys_a2):
    text = dumps(report_to_doc(analyze_all(sys_a2), "0"))
    assert dumps(loads(text)) == text


# -- certificate documents ---------------------------------------------------


def _bundle_certs(path):
    code, out, _ = run("certify", path, "--canonical")
    assert code == EXIT_OK
    return json.loads(out)


def test_certificate_round_trip_reverifies_bit_identically(sys_a94):
    report = analyze_all(sys_a94)
    w = report.outcome("T4").witness
    certs = [synthesize_common(sys_a94, w["d"].v, w["theta"].v, w["d"].lam, w["theta"].lam)]
    certs += [c for _, c in _certificates(sys_a94, report)]
    for cert in certs:
        text = dumps(certificate_to_doc(cert))
        back = certificate_from_doc(loads(text))
        assert type(back) is type(cert)
        assert dumps(certificate_to_doc(back)) == text
        a, b = verify_certificate(sys_a94, cert), verify_certificate(sys_a94, back)
        assert a.accepted and b.accepted
        assert a.margins == b.margins
    kinds = {type(c) for c in certs}
    assert SwitchedDiagonalCertificate in kinds and SwitchedL1Certificate in kinds


def test_extended_certificate_round_trip():
    rng = np.random.default_rng(5)
    sys = SwitchedDelaySystem(rng.uniform(0, 0.05, (2, 2, 2)), rng.uniform(0, 0.05, (2, 2, 2, 2)))
    w = analyze_all(sys).outcome("T6").witness
    cert = synthesize_extended(sys, w["d"].v, w["theta"].v, w["d"].lam, w["theta"].lam)
    text = dumps(certificate_to_doc(cert))
    back = certificate_from_doc(loads(text))
    assert back.extended and dumps(certificate_to_doc(back)) == text
    assert verify_certificate(sys, back).accepted


def test_certificate_document_errors():
    doc = json.loads(dumps(certificate_to_doc(synthesize_common(paper_example(2), *_t4_args()))))
    doc["Q"][0][1] = 0.5
    with pytest.raises(DocumentError, match="off-diagonal"):
        certificate_from_doc(doc)
    with pytest.raises(DocumentError):
        certificate_from_doc({"kind": "certificate", "certificate_type": "mystery"})


def _t4_args():
    w = analyze_all(paper_example(2)).outcome("T4").witness
    return w["d"].v, w["theta"].v, w["d"].lam, w["theta"].lam


# -- commands ----------------------------------------------------------------


def test_paper_example_a2():
    code, out, _ = run("paper-example", "--a", "2")
    assert code == EXIT_OK
    assert "(1+sqrt(6))/4" in out and "(2+sqrt(6))/4" in out
    lam_line = next(line for line in out.splitlines() if line.strip().startswith("lambda*"))
    mu_line = next(line for line in out.splitlines() if line.strip().startswith("mu* (minimal"))
    assert float(lam_line.split()[4]) == pytest.approx(LAMBDA_A2, abs=1e-6)
    assert float(mu_line.split()[4]) == pytest.approx(MU_A2, abs=1e-6)
    assert "T4   holds (product 0.959279)" in out
    assert "common certificate" in out


def test_paper_example_a94():
    code, out, _ = run("paper-example", "--a", "9/4")
    assert code == EXIT_OK
    p4 = next(line for line in out.splitlines() if "mode-indexed" in line)
    assert float(p4.split()[-1]) <= 1.152
    assert "P4   holds" in out
    assert "coupled slack 0.000999" in out and "(feasible)" in out


def test_paper_example_switched_only_regime():
    code, out, _ = run("paper-example", "--a", "2.4")
    assert code == EXIT_OK
    assert "T4   fails" in out and "P4   holds" in out
    assert "switched certificate available" in out


def test_paper_example_bad_parameter():
    assert run("paper-example", "--a", "-1")[0] == EXIT_INPUT
    assert run("paper-example", "--a", "two")[0] == EXIT_INPUT


def test_analyze_exit_codes(tmp_path):
    code, out, _ = run("analyze", FIXTURE, "--canonical")
    assert code == EXIT_OK
    doc = json.loads(out)
    assert doc["strongest_conclusion"] == "diagonally stable via common functional"
    assert doc["tolerances"]["tol"] == 1e-9
    unstable = tmp_path / "unstable.json"
    unstable.write_text(_doc(A=[[[2.0, 0.0], [0.0, 2.0]]]))
    assert run("analyze", str(unstable))[0] == EXIT_FAILS


def test_analyze_tol_flag():
    code, out, _ = run("analyze", FIXTURE, "--canonical", "--tol", "1e-6")
    assert code == EXIT_OK and json.loads(out)["tolerances"]["tol"] == 1e-6
    assert run("analyze", FIXTURE, "--tol", "-1")[0] == EXIT_INPUT


def test_input_error_paths(tmp_path):
    neg = tmp_path / "neg.json"
    neg.write_text(_doc(A=[[[0.1, -0.1], [0.0, 0.1]]]))
    code, _, err = run("analyze", str(neg))
    assert code == EXIT_INPUT and "A[0][0][1]" in err
    assert run("analyze", str(tmp_path / "missing.json"))[0] == EXIT_INPUT
    assert run("simulate", FIXTURE, "--f", "cube")[0] == EXIT_INPUT
    assert run("simulate", FIXTURE, "--switching", "fixed:3")[0] == EXIT_INPUT
    assert run("simulate", FIXTURE, "--input", "constant:0.1")[0] == EXIT_INPUT
    assert run("simulate", FIXTURE, "--init", "1,2")[0] == EXIT_INPUT
    assert run("simulate", FIXTURE, "--steps", "0")[0] == EXIT_INPUT
    assert run("bogus")[0] == EXIT_INPUT


def test_certify_and_verify(tmp_path):
    bundle = tmp_path / "certs.json"
    assert run("certify", FIXTURE, "--canonical", "--report", str(bundle))[0] == EXIT_OK
    doc = json.loads(bundle.read_text())
    assert [e["theorem"] for e in doc["certificates"]] == ["T4", "T7", "P4"]
    assert all(e["verification"]["accepted"] for e in doc["certificates"])
    code, out, _ = run("verify", str(bundle), FIXTURE, "--canonical")
    assert code == EXIT_OK and json.loads(out)["accepted"]


def test_verify_tampered_certificate(tmp_path):
    cert = _bundle_certs(FIXTURE)["certificates"][0]["certificate"]
    cert["Q"][0][0] = -cert["Q"][0][0]
    path = tmp_path / "tampered.json"
    path.write_text(json.dumps(cert))
    code, out, _ = run("verify", str(path), FIXTURE, "--canonical")
    assert code == EXIT_FAILS
    failures = json.loads(out)["results"][0]["failures"]
    assert "Q diagonal is not strictly positive" in failures
    assert any("C_1" in f for f in failures)


def test_verify_against_other_system(tmp_path):
    bundle = tmp_path / "certs.json"
    bundle.write_text(json.dumps(_bundle_certs(FIXTURE)))
    other = tmp_path / "other.json"
    other.write_text(dumps(system_to_doc(paper_example(4))))
    assert run("verify", str(bundle), str(other))[0] == EXIT_FAILS


def test_simulate_csv():
    code, out, _ = run("simulate", FIXTURE, "--steps", "3", "--switching", "periodic:1,2")
    assert code == EXIT_OK
    assert out.splitlines() == [
        "k,sigma,x1,x2,V",
        "0,1,1.0,1.0,",
        "1,2,0.75,1.0,",
        "2,1,0.75,0.5,",
        "3,2,0.625,0.6875,",
    ]


def test_simulate_with_certificate(tmp_path):
    bundle = tmp_path / "certs.json"
    bundle.write_text(json.dumps(_bundle_certs(FIXTURE)))
    code, out, _ = run("simulate", FIXTURE, "--steps", "20", "--switching", "adversarial", "--f", "tanh", "--certificate", str(bundle))
    assert code == EXIT_OK
    V = [float(line.split(",")[-1]) for line in out.splitlines()[1:]]
    assert len(V) == 21 and all(b < a for a, b in zip(V, V[1:]))


def test_spectral_command():
    code, out, _ = run("spectral", FIXTURE, "--canonical")
    assert code == EXIT_OK
    doc = json.loads(out)
    assert doc["rho1"]["rho_max"] == pytest.approx(MU_A2, abs=1e-9)
    assert doc["rho2"]["rho_max"] == pytest.approx(LAMBDA_A2, abs=1e-9)
    assert doc["rho1"]["count"] == 16 and doc["rho2"]["count"] == 4
    assert math.isclose(doc["product"], MU_A2 * LAMBDA_A2, rel_tol=1e-12)


@pytest.mark.parametrize("command", [["analyze"], ["certify"], ["spectral"], ["simulate", "--switching", "random", "--seed", "4"]])
def test_canonical_output_is_deterministic(command):
    first = run(command[0], FIXTURE, "--canonical", *command[1:])
    second = run(command[0], FIXTURE, "--canonical", *command[1:])
    assert first == second
    assert "generated_at" not in first[1]


def test_non_canonical_output_carries_metadata():
    doc = json.loads(run("analyze", FIXTURE)[1])
    assert "generated_at" in doc and doc["backend"] in ("numba", "numpy")


def test_console_script_entry_point():
    proc = subprocess.run(
        [_sys.executable, "-m", "switchdiag.cli", "paper-example", "--a", "2"],
        capture_output=True,
        text=True,
        check=False,
    )
    assert proc.returncode == 0
    assert "(1+sqrt(6))/4" in proc.stdout


def test_documents_accept_random_reports():
    rng = np.random.default_rng(8)
    for _ in range(5):
        sys = random_system(rng, 2, 2, scale=0.4)
        text = dumps(report_to_doc(analyze_all(sys), "0"))
        assert dumps(loads(text)) == text
