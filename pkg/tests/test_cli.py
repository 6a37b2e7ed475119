import json
import subprocess
import sys
from pathlib import Path

import jsonschema

from edhoc_lab.cli import BUILTIN_SCENARIOS, EXIT_DENIED, EXIT_OK, EXIT_PROTOCOL, EXIT_USAGE, Scenario, main
from edhoc_lab.scenarios import run_li

DOCS = Path(__file__).resolve().parent.parent / "docs"
VECTORS = Path(__file__).parent / "vectors"


def schema(name):
    return json.loads((DOCS / "schemas" / f"{name}.schema.json").read_text())


def cli(capsys, *argv):
    try:
        code = main(list(argv))
    except SystemExit as exc:
        code = exc.code
    out, err = capsys.readouterr()
    return code, [json.loads(line) for line in out.splitlines()], err


def test_handshake_ok(capsys):
    code, lines, err = cli(capsys, "handshake", "--method", "0", "--seed", "7")
    assert code == EXIT_OK
    assert lines[-1]["completed"] and lines[-1]["exporters_match"]
    assert "exporter secrets match" in err
    for line in lines[:-1]:
        jsonschema.validate(line, schema("transcript"))


def test_bad_method_is_usage_error(capsys):
    code, _, err = cli(capsys, "handshake", "--method", "9")
    assert code == EXIT_USAGE
    assert "usage:" in err


def test_psk_mismatch_exit_2(capsys):
    code, lines, _ = cli(capsys, "handshake", "--method", "4", "--psk-mismatch")
    assert code == EXIT_PROTOCOL
    errors = [l for l in lines if l.get("error")]
    assert errors[0]["error"] == "AUTH_FAILURE" and errors[0]["message_round"] == 3


def test_psk_mismatch_needs_method_4(capsys):
    code, _, _ = cli(capsys, "handshake", "--method", "0", "--psk-mismatch")
    assert code == EXIT_USAGE


def test_mitm_single_cells(capsys):
    code, lines, _ = cli(capsys, "mitm", "--method", "0", "--compromised")
    assert code == EXIT_OK and lines[0]["outcome"] == "Success"
    jsonschema.validate(lines[0], schema("attack_report"))
    code, lines, _ = cli(capsys, "mitm", "--method", "0", "--own-keys", "--strict")
    assert code == EXIT_OK and lines[0]["outcome"] == "FailedAuthAtMsg2"


def test_mitm_all(capsys):
    code, lines, err = cli(capsys, "mitm", "--all", "--seed", "42")
    assert code == EXIT_OK
    reports = [l for l in lines if l["type"] == "attack_report"]
    assert len(reports) == 20 and all(r["matches_expected"] for r in reports)
    assert lines[-1]["type"] == "attack_summary" and lines[-1]["matching"] == 20
    assert "20/20" in err


def test_li_verbs(capsys):
    code, lines, _ = cli(capsys, "li", "--cooperate", "all", "--seed", "42")
    assert code == EXIT_OK
    rec = lines[0]
    jsonschema.validate(rec, schema("interception_record"))
    result = run_li(0, 42)
    assert rec["recovered_secret"] == result.record.recovered_secret.hex()
    assert rec["recovered_matches_session"] and len(rec["decrypted_records"]) == 2
    code, lines, _ = cli(capsys, "li", "--cooperate", "authority-only", "--seed", "42")
    assert code == EXIT_DENIED and lines[0]["recovery_error"] == "INSUFFICIENT_SHARES"
    code, lines, _ = cli(capsys, "li", "--cooperate", "none", "--seed", "42")
    assert code == EXIT_DENIED and lines[0]["recovered_secret"] is None and lines[0]["mirrored_frames"]
    code, _, _ = cli(capsys, "li", "--cooperate", "Q")
    assert code == EXIT_USAGE


def test_json_only_silences_summary(capsys):
    code, lines, err = cli(capsys, "handshake", "--json-only")
    assert code == EXIT_OK and lines and err == ""


def test_demo(capsys):
    code, lines, _ = cli(capsys, "demo", "--json-only")
    assert code == EXIT_OK
    assert {l.get("scenario") for l in lines} >= {s.name for s in BUILTIN_SCENARIOS}


def test_scenario_file(capsys, tmp_path):
    path = tmp_path / "sc.json"
    path.write_text(json.dumps([Scenario("mitm", "cell", method=3, seed=5).to_json(), {"verb": "li", "cooperate": "I,R"}]))
    code, lines, _ = cli(capsys, "demo", "--scenario", str(path), "--json-only")
    assert code == EXIT_OK
    assert lines[0]["scenario"] == "cell" and lines[-1]["recovery_error"] == "INSUFFICIENT_SHARES"
    path.write_text(json.dumps({"verb": "mitm", "bogus": 1}))
    code, _, _ = cli(capsys, "mitm", "--scenario", str(path))
    assert code == EXIT_USAGE


def test_credentials_fixture(capsys):
    fixture = VECTORS / "credentials_method1.json"
    code, lines, _ = cli(capsys, "handshake", "--method", "1", "--credentials", str(fixture), "--json-only")
    assert code == EXIT_OK and lines[-1]["exporters_match"]
    code, _, _ = cli(capsys, "handshake", "--method", "3", "--credentials", str(fixture))
    assert code == EXIT_USAGE


def _stdout(capsys, *argv):
    main(list(argv))
    return capsys.readouterr().out


def test_golden_transcript(capsys):
    out = _stdout(capsys, "handshake", "--method", "0", "--seed", "7", "--json-only")
    transcript = [l for l in out.splitlines() if '"type": "transcript"' in l]
    assert transcript == (DOCS / "golden" / "transcript.jsonl").read_text().splitlines()


def test_golden_attack_report(capsys):
    out = _stdout(capsys, "mitm", "--method", "0", "--compromised", "--seed", "42", "--json-only")
    assert json.loads(out.splitlines()[0]) == json.loads((DOCS / "golden" / "attack_report.json").read_text())


def test_golden_interception_record(capsys):
    out = _stdout(capsys, "li", "--cooperate", "all", "--seed", "42", "--json-only")
    assert json.loads(out) == json.loads((DOCS / "golden" / "interception_record.json").read_text())


def test_module_entry_point():
    proc = subprocess.run(
        [sys.executable, "-m", "edhoc_lab", "handshake", "--method", "2", "--json-only"],
        capture_output=True,
        text=True,
        check=False,
    )
    assert proc.returncode == 0, proc.stderr
    assert json.loads(proc.stdout.splitlines()[-1])["completed"]
