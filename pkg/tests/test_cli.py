from __future__ import annotations

import json

import pytest

from sessionkit import contract, gen_random
from sessionkit.cli import main
from conftest import BALLOT_AB, BALLOT_MALICIOUS, BALLOT_SKP, VOTER


@pytest.fixture()
def files(tmp_path):
    def write(name, text):
        path = tmp_path / name
        path.write_text(text + "\n", encoding="utf-8")
        return str(path)

    return {
        "voter": write("voter.sc", VOTER),
        "ballot_ab": write("ab.sc", BALLOT_AB),
        "ballot_skp": write("skp.sc", BALLOT_SKP),
        "malicious": write("mal.sc", BALLOT_MALICIOUS),
        "b": write("b.sc", "b"),
        "ab_chain": write("chain.sc", "!a.!b"),
        "a": write("a.sc", "a"),
        "ca": write("ca.sc", "!c.a"),
        "dir": tmp_path,
    }


def run(capsys, *argv):
    code = main(list(argv))
    captured = capsys.readouterr()
    return code, captured.out, captured.err


# -- check ---------------------------------------------------------------------

def test_check_compliant_pair_exits_zero(files, capsys):
    code, out, _ = run(capsys, "check", "--client", files["voter"], "--server", files["ballot_skp"])
    assert code == 0 and "compliant" in out


def test_check_noncompliant_pair_exits_one_with_witness(files, capsys):
    code, out, _ = run(
        capsys, "check", "--client", files["voter"], "--server", files["malicious"], "--witness"
    )
    assert code == 1
    assert "skip-only loop" in out


def test_check_strong_vs_skp_modes(files, capsys):
    code, _, _ = run(capsys, "check", "--client", files["b"], "--server", files["ab_chain"], "--mode", "strong")
    assert code == 1
    code, _, _ = run(capsys, "check", "--client", files["b"], "--server", files["ab_chain"], "--mode", "skp")
    assert code == 0


def test_check_both_engines_and_derivation_dump(files, tmp_path, capsys):
    dump = tmp_path / "deriv.json"
    code, out, _ = run(
        capsys,
        "check",
        "--client", files["voter"],
        "--server", files["ballot_skp"],
        "--engine", "both",
        "--emit-derivation", str(dump),
        "--json",
    )
    assert code == 0
    doc = json.loads(out)
    assert doc["result"] == "compliant"
    assert doc["stats"]["rules"] > 0
    saved = json.loads(dump.read_text(encoding="utf-8"))
    assert "rule" in saved


def test_check_reports_usage_errors(files, capsys):
    code, _, err = run(capsys, "check", "--client", files["voter"], "--server", str(files["dir"] / "missing.sc"))
    assert code == 2 and "error" in err


def test_check_parse_error_exits_two(files, tmp_path, capsys):
    bad = tmp_path / "bad.sc"
    bad.write_text("a.b +", encoding="utf-8")
    code, _, err = run(capsys, "check", "--client", str(bad), "--server", files["ballot_ab"])
    assert code == 2 and "error" in err


# -- subtype --------------------------------------------------------------------

def test_subtype_positive(files, capsys):
    code, out, _ = run(capsys, "subtype", "--sub", files["a"], "--super", files["ca"])
    assert code == 0 and out.strip() == "sub"


def test_subtype_reflexive(files, capsys):
    code, _, _ = run(capsys, "subtype", "--sub", files["voter"], "--super", files["voter"])
    assert code == 0


def test_subtype_negative_prints_the_counterexample(files, capsys):
    code, out, _ = run(capsys, "subtype", "--sub", files["ca"], "--super", files["a"])
    assert code == 1
    assert "c.!a" in out


# -- small adapters ----------------------------------------------------------------

def test_dual_prints_the_dual(files, tmp_path, capsys):
    path = tmp_path / "t.sc"
    path.write_text("a.!b", encoding="utf-8")
    code, out, _ = run(capsys, "dual", str(path))
    assert code == 0 and out.strip() == "!a.b"


def test_normalize_prints_canonical_form(files, tmp_path, capsys):
    path = tmp_path / "t.sc"
    path.write_text("b.1 + a.1", encoding="utf-8")
    code, out, _ = run(capsys, "normalize", str(path))
    assert code == 0 and out.strip() == "a + b"


def test_simulate_shows_the_skipping_trace(files, capsys):
    code, out, _ = run(
        capsys, "simulate", "--client", files["voter"], "--server", files["malicious"], "--max-steps", "6"
    )
    assert code == 0
    assert out.strip() == "τ τ skp skp skp skp (truncated)"


def test_gen_is_deterministic(capsys):
    code, first, _ = run(capsys, "gen", "--seed", "42", "--size", "5", "--alphabet", "3")
    assert code == 0
    _, second, _ = run(capsys, "gen", "--seed", "42", "--size", "5", "--alphabet", "3")
    assert first == second
    assert contract(first.strip()) == gen_random(42, 5, 3)


# -- registry ------------------------------------------------------------------------

def test_registry_add_and_query(files, tmp_path, capsys):
    store = str(tmp_path / "reg.jsonl")
    code, out, _ = run(capsys, "registry", "add", "--store", store, "--name", "ballot", files["ballot_skp"])
    assert code == 0 and json.loads(out)["id"] == 1
    code, out, _ = run(capsys, "registry", "add", "--store", store, "--name", "mal", files["malicious"])
    assert code == 0 and json.loads(out)["id"] == 2
    code, out, _ = run(capsys, "registry", "query", "--store", store, files["voter"])
    assert code == 0
    assert json.loads(out) == {"matches": [{"id": 1, "name": "ballot"}]}
    code, out, _ = run(capsys, "registry", "query", "--store", store, "--scan", files["voter"])
    assert json.loads(out) == {"matches": [{"id": 1, "name": "ballot"}]}


def test_usage_error_exits_two(capsys):
    assert main(["check"]) == 2
    capsys.readouterr()
