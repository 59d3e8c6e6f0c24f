import json
import subprocess
import sys

import pytest

from fellerlab import cli
from fellerlab.cli import (EXIT_CONFLICT, EXIT_OK, EXIT_ROUTE, EXIT_VALIDATION, OPEN_PROBLEM_TAG, ValidationError,
                           cross_validate, list_presets, load_scenario, main, preset_path, run_scenario,
                           validate_scenario)
from fellerlab.verdict import fails, holds, inconclusive


def scenario(**over):
    base = {"version": 1, "name": "plane", "kind": "model", "model": {"dim": 2, "g": {"body": "r"}},
            "routes": ["integral"]}
    base.update(over)
    return base


def test_catalogue():
    cat = list_presets()
    assert len(cat) >= 6
    assert all(p["anchor"] for p in cat)
    lk = [p for p in cat if p["name"].startswith("LK_")]
    assert lk and all(OPEN_PROBLEM_TAG in p["tags"] for p in lk)
    for p in cat:
        load_scenario(preset_path(p["name"]))


def test_hyperbolic_preset_without_heat():
    data = json.loads(preset_path("hyperbolic3").read_text())
    data["routes"] = ["integral", "exterior", "comparison"]
    rep = run_scenario(data)
    assert rep.exit_code == EXIT_OK
    assert set(rep.matrix["feller"].values()) == {"Holds"}
    assert rep.matrix["parabolic"]["integral"] == "Fails"
    assert rep.matrix["stochastically_complete"]["integral"] == "Holds"


def test_every_preset_runs_clean():
    for p in list_presets():
        rep = run_scenario(preset_path(p["name"]))
        assert rep.exit_code == EXIT_OK and not rep.conflicts, p["name"]
        if p["name"] == "ex_versus1":
            assert set(rep.matrix["feller"].values()) == {"Fails"}
        if p["name"] == "hyperbolic3":
            assert set(rep.matrix["feller"].values()) == {"Holds"}


def test_deterministic_bytes(capsys):
    outs = []
    for _ in range(2):
        assert main(["run", "faber_krahn_power4", "--json"]) == EXIT_OK
        outs.append(capsys.readouterr().out)
    assert outs[0] == outs[1]
    d = json.loads(outs[0])
    assert d["schema"] == cli.REPORT_SCHEMA and len(d["provenance"]["scenario_sha256"]) == 64


def test_parse_error_names_token_and_field(tmp_path, capsys):
    path = tmp_path / "bad.json"
    path.write_text(json.dumps(scenario(model={"dim": 2, "g": {"body": "r $ 2"}})))
    assert main(["run", str(path)]) == EXIT_VALIDATION
    err = capsys.readouterr().err
    assert "'$'" in err and "model.g.body" in err


def test_json_syntax_error_has_position(tmp_path):
    path = tmp_path / "bad.json"
    path.write_text('{"version": 1,\n "name": }')
    with pytest.raises(ValidationError) as exc:
        load_scenario(path)
    assert exc.value.where.startswith("line 2")


@pytest.mark.parametrize("data, where", [
    (scenario(routes=["isoperimetry"]), "routes"),
    (scenario(kind="faber_krahn"), "profile"),
    ({"name": "x"}, "<root>"),
    (scenario(model={"dim": 1, "g": {"body": "r"}}), "model.dim"),
])
def test_schema_rejections(data, where):
    with pytest.raises(ValidationError) as exc:
        validate_scenario(data)
    assert exc.value.where == where


def test_conflict_and_route_failure_exit_codes(tmp_path, monkeypatch, capsys):
    path = tmp_path / "s.json"
    path.write_text(json.dumps(scenario(routes=["integral", "exterior"])))
    monkeypatch.setitem(cli._RUNNERS, "model", lambda sc, tol, dump: {
        "integral": lambda: {"feller": holds()}, "exterior": lambda: {"feller": fails()}})
    assert main(["run", str(path)]) == EXIT_CONFLICT
    assert "CONFLICT" in capsys.readouterr().out

    def boom():
        raise RuntimeError("solver diverged")

    monkeypatch.setitem(cli._RUNNERS, "model", lambda sc, tol, dump: {"integral": lambda: {"feller": holds()},
                                                                       "exterior": boom})
    assert main(["run", str(path)]) == EXIT_ROUTE


def test_cross_validate_ignores_inconclusive():
    matrix, conflicts = cross_validate({"a": {"feller": holds()}, "b": {"feller": inconclusive()},
                                        "c": {"feller": holds(), "note": "text"}})
    assert matrix == {"feller": {"a": "Holds", "b": "Inconclusive", "c": "Holds"}} and conflicts == []


def test_subcommands(capsys, tmp_path):
    assert main(["classify", "-m", "3", "--g", "sinh(r)", "--json"]) == EXIT_OK
    assert json.loads(capsys.readouterr().out)["feller"]["status"] == "Holds"
    assert main(["exterior", "-m", "3", "--g", "r", "--dump-profiles", str(tmp_path)]) == EXIT_OK
    assert "Holds" in capsys.readouterr().out and (tmp_path / "exterior_profile.csv").exists()
    assert main(["compare", "hsu", "--G", "1+r"]) == EXIT_OK
    assert "Holds" in capsys.readouterr().out
    assert main(["compare", "sec", "--G", "1"]) == EXIT_ROUTE
    capsys.readouterr()
    assert main(["ends", "--f", "cosh(t)", "-m", "2", "--json"]) == EXIT_OK
    assert json.loads(capsys.readouterr().out)["feller"]["status"] == "Holds"
    assert main(["isoperimetry", "--Lambda", "s^(-1/2)", "--t", "2"]) == EXIT_OK
    assert "V(2) = 1" in capsys.readouterr().out
    assert main(["presets"]) == EXIT_OK
    assert "ex_versus1" in capsys.readouterr().out
    assert main(["classify", "-m", "2", "--g", "exp(r"]) == EXIT_VALIDATION


def test_dump_profiles(tmp_path):
    data = json.loads(preset_path("euclidean_m3").read_text())
    data["routes"] = ["exterior"]
    rep = run_scenario(data, dump_profiles=str(tmp_path))
    assert rep.profiles and all(p.startswith(str(tmp_path)) for p in rep.profiles.values())


def test_console_entry_point():
    out = subprocess.run([sys.executable, "-m", "fellerlab.cli", "--version"], capture_output=True, text=True)
    assert out.returncode == 0 and "fellerlab" in out.stdout
