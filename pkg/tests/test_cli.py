import subprocess
import sys

import pytest

from dartwin import corpus
from dartwin.cli import main
from dartwin.parser import load_model
from dartwin.transform import ChangeSet, is_isomorphic


def fx(name):
    return str(corpus.path(name))


def test_validate_corpus(capsys):
    assert main(["validate", *(fx(n) for n in corpus.FIXTURES)]) == 0
    out = capsys.readouterr().out
    assert "error" not in out


def test_validate_broken(tmp_path, capsys):
    broken = tmp_path / "broken.dartwin"
    broken.write_text(
        'dartwin "B" {\n  goal G { poi t : celsius }\n  system S {\n    in t : celsius [monitoring]\n'
        "    flow boundary.t -> D.nothere\n  }\n}\n"
    )
    assert main(["validate", str(broken)]) == 1
    lines = [l for l in capsys.readouterr().out.splitlines() if "error" in l]
    assert len(lines) == 1


def test_validate_missing(tmp_path):
    assert main(["validate", str(tmp_path / "missing.dartwin")]) == 2


def test_validate_records(capsys):
    assert main(["validate", "--format", "records", fx("orthogonal_freeze")]) == 0
    out = capsys.readouterr().out
    assert '"code": "ACT-CONFLICT"' in out


def test_transform_chaining(tmp_path, fixtures):
    out = tmp_path / "chained.dartwin"
    code = main([
        "transform", "--kind", "chaining", "--upstream", "ThermostatLogic", "--downstream", "FreezeProtection",
        "--signal", "on_off", fx("orthogonal_freeze"), "-o", str(out),
    ])
    assert code == 0
    assert is_isomorphic(load_model(out.read_text()), fixtures["chained_freeze"])
    assert ChangeSet.from_text((tmp_path / "chained.dartwin.changes").read_text())


def test_transform_then_diff_reproduces_sidecar(tmp_path, capsys):
    out = tmp_path / "flat.dartwin"
    assert main(["transform", "--kind", "flatten", "--system", "Thermostat", fx("green_comfort"), "-o", str(out)]) == 0
    capsys.readouterr()
    assert main(["diff", fx("green_comfort"), str(out)]) == 0
    assert capsys.readouterr().out == (tmp_path / "flat.dartwin.changes").read_text()


def test_transform_flatten(tmp_path, fixtures):
    out = tmp_path / "flat.dartwin"
    assert main(["transform", "--kind", "flatten", "--system", "Thermostat", fx("green_comfort"), "-o", str(out)]) == 0
    assert is_isomorphic(load_model(out.read_text()), fixtures["flat_green_comfort"])


def test_transform_precondition_failure(tmp_path, capsys):
    code = main([
        "transform", "--kind", "arbitration", "--writer-a", "ThermostatLogic", "--writer-b", "EnergySaving",
        "--target", "Thermostat.heater", "--rule", "min", fx("orthogonal_freeze"), "-o", str(tmp_path / "x.dartwin"),
    ])
    assert code == 3
    assert "unit mismatch" in capsys.readouterr().err


def test_transform_with_addition(tmp_path, fixtures):
    out = tmp_path / "green.dartwin"
    code = main([
        "transform", "--kind", "hierarchical", "--addition", fx("additions/energy_saving"), fx("thermal_comfort"), "-o", str(out),
    ])
    assert code == 0
    assert is_isomorphic(load_model(out.read_text()), fixtures["green_comfort"])


def test_transform_new_output(tmp_path, fixtures):
    out = tmp_path / "heater2.dartwin"
    code = main([
        "transform", "--kind", "new_output", "--dt", "FreezeProtection", "--port", "heater2:on_off:control",
        fx("orthogonal_freeze"), "-o", str(out),
    ])
    assert code == 0
    assert is_isomorphic(load_model(out.read_text()), fixtures["additional_heater"])


def test_transform_missing_parameters():
    assert main(["transform", "--kind", "chaining", fx("orthogonal_freeze")]) == 2


def test_transform_basic(tmp_path, fixtures):
    out = tmp_path / "g0.dartwin"
    assert main(["transform", "--kind", "basic", "--addition", fx("additions/optimal_control"), "-o", str(out)]) == 0
    assert load_model(out.read_text()) == fixtures["gantry_initial"]


def test_render_highlight(tmp_path, capsys):
    changes = tmp_path / "c.changes"
    assert main(["diff", fx("thermal_comfort"), fx("flat_green_comfort"), "-o", str(changes)]) == 0
    capsys.readouterr()
    assert main(["render", fx("flat_green_comfort"), "--highlight", str(changes)]) == 0
    a = capsys.readouterr().out
    assert main(["render", fx("flat_green_comfort"), "--diff-from", fx("thermal_comfort")]) == 0
    assert capsys.readouterr().out == a
    assert 'class="highlight"' in a


def test_simulate_thermal_hacker_violates(tmp_path):
    csv = tmp_path / "trace.csv"
    assert main(["simulate", fx("thermal_comfort"), fx("hacker.scn"), "--csv", str(csv)]) == 1
    assert csv.read_text().startswith("time,room_temp,")


def test_simulate_chained_guarded_satisfies_no_freezing(capsys):
    assert main(["simulate", fx("chained_freeze"), fx("hacker_guarded.scn"), "--goal", "NoFreezing"]) == 0
    assert "NoFreezing: satisfied" in capsys.readouterr().out


def test_simulate_chained_default_threshold_dips_within_bound(capsys):
    # With the threshold exactly at 8 the room touches 8 minus less than one
    # step of loss, so the strict goal reports a violation.
    assert main(["simulate", fx("chained_freeze"), fx("hacker.scn"), "--goal", "NoFreezing"]) == 1


def test_simulate_missing_scenario(tmp_path):
    assert main(["simulate", fx("chained_freeze"), str(tmp_path / "none.scn")]) == 2


def test_simulate_unbound_behavior():
    assert main(["simulate", fx("gantry_initial"), fx("hacker.scn")]) == 2


def test_simulate_records(capsys):
    main(["simulate", fx("thermal_comfort"), fx("energy.scn"), "--format", "records"])
    assert '"goal": "WarmComfort"' in capsys.readouterr().out


def test_usage_errors():
    assert main([]) == 2
    assert main(["frobnicate"]) == 2


def test_corpus_commands(capsys):
    assert main(["corpus", "list"]) == 0
    listed = capsys.readouterr().out.split()
    assert set(corpus.FIXTURES) <= set(listed)
    assert main(["corpus", "path", "thermal_comfort"]) == 0
    assert capsys.readouterr().out.strip().endswith("thermal_comfort.dartwin")
    assert main(["corpus", "path", "nonexistent"]) == 2


def test_module_entry_point():
    proc = subprocess.run([sys.executable, "-m", "dartwin", "validate", fx("thermal_comfort")], capture_output=True, text=True)
    assert proc.returncode == 0
    assert proc.stdout.strip().endswith(": ok")


def test_outputs_do_not_depend_on_cwd(tmp_path, monkeypatch, capsys):
    main(["render", fx("compromise_saving")])
    first = capsys.readouterr().out
    monkeypatch.chdir(tmp_path)
    main(["render", fx("compromise_saving")])
    assert capsys.readouterr().out == first
