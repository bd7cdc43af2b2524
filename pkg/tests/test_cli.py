import json
import subprocess
import sys
from importlib import resources

import jsonschema
import pytest

from conftest import CORPUS
from toast.cli import FAIL, INCONCLUSIVE, INPUT, OK, main

SCHEMA = json.loads(resources.files("toast").joinpath("schema.json").read_text())


def c(name):
    return str(CORPUS / name)


def run_json(capsys, *argv):
    code = main([*argv, "--json"])
    out = json.loads(capsys.readouterr().out)
    jsonschema.validate(out, SCHEMA)
    assert out["exit"] == code
    return code, out


@pytest.mark.parametrize(
    "argv,expected",
    [
        (["check", c("junk_amended.toast"), c("weak_persistency.toast")], OK),
        (["check", c("junk.toast")], FAIL),
        (["check", c("broken.toast")], INPUT),
        (["check", "no/such/file.toast"], INPUT),
        (["dual", c("weak_persistency.toast"), "s"], OK),
        (["dual", c("weak_persistency.toast"), "nope"], INPUT),
        (["progress", c("pingpong.toast"), "--horizon", "12"], OK),
        (["progress", c("unsafe_stuck.toast"), "--override-wf"], FAIL),
        (["progress", c("unsafe_stuck.toast")], FAIL),
        (["progress", c("pingpong.toast"), "--horizon", "0"], INPUT),
        (["typecheck", c("tc_example_bounded.toast")], OK),
        (["typecheck", c("interleaving.toast")], FAIL),
        (["typecheck", c("pingpong.toast")], INPUT),
        (["simulate", c("mixed_pingpong_system.toast"), "--fuel", "200", "--seed", "2"], OK),
        (["simulate", c("throttling_system.toast"), "--fuel", "3"], INCONCLUSIVE),
        (["sr", c("throttling_system.toast"), "--fuel", "2"], INCONCLUSIVE),
    ],
)
def test_exit_codes_and_schema(capsys, argv, expected):
    code, out = run_json(capsys, *argv)
    assert code == expected
    assert out["command"] == argv[0]


def test_text_output(capsys):
    assert main(["check", c("junk.toast")]) == FAIL
    assert "junk: rejected (feasibility)" in capsys.readouterr().out
    assert main(["dual", c("weak_persistency.toast"), "s"]) == OK
    assert capsys.readouterr().out.strip() == "{ ?data<string>(x<3).end, !timeout(x>4).end }"


def test_parse_errors_point_at_the_source(capsys):
    assert main(["check", c("broken.toast")]) == INPUT
    err = capsys.readouterr().err
    assert "broken.toast:1:" in err and "error:" in err


def test_typecheck_tree(capsys):
    assert main(["typecheck", c("tc_example_bounded.toast"), "--tree"]) == OK
    out = capsys.readouterr().out
    assert out.startswith("bounded: accepted")
    assert "[Timeout]" in out and "[Del[δ]]" in out


def test_simulation_is_deterministic(capsys):
    argv = ["simulate", c("mixed_pingpong_system.toast"), "--fuel", "40", "--seed", "9"]
    main(argv)
    first = capsys.readouterr().out
    main(argv)
    assert capsys.readouterr().out == first
    steps = [l for l in first.splitlines() if l.startswith("STEP ")]
    assert steps and all(" :: " in l for l in steps)
    assert steps[0].startswith("STEP 1: ")


def test_corpus_env_fallback(capsys, monkeypatch):
    monkeypatch.setenv("TOAST_CORPUS", str(CORPUS))
    assert main(["dual", "weak_persistency.toast", "d"]) == OK
    monkeypatch.delenv("TOAST_CORPUS")
    assert main(["dual", "weak_persistency.toast", "d"]) == INPUT


def test_missing_role_binding(capsys, tmp_path):
    f = tmp_path / "open.toast"
    f.write_text("type s = !a.end;\ncheck c = p!a.q!a.0 with p: s;\n")
    code, out = run_json(capsys, "typecheck", str(f))
    assert code == INPUT and "no session type bound for q" in out["error"]


def test_bad_arguments():
    assert main(["frobnicate"]) == INPUT
    assert main([]) == INPUT


def test_module_entry_point():
    r = subprocess.run(
        [sys.executable, "-m", "toast", "check", c("junk_amended.toast")], capture_output=True, text=True
    )
    assert r.returncode == OK and "amended: well-formed" in r.stdout
