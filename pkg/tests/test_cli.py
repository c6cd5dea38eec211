import json
import math
from importlib import resources

import jsonschema
import pytest

from penalab.cli import main, to_json


def _schema(name):
    return json.loads(resources.files("penalab").joinpath("schemas", f"{name}.schema.json").read_text())


def _run(tmp_path, *argv):
    code = main([*argv, "--out", str(tmp_path)])
    return code


def _check_outputs(tmp_path, stem, command):
    report = json.loads((tmp_path / f"{stem}.json").read_text())
    jsonschema.validate(report, _schema(command))
    manifest = json.loads((tmp_path / f"{stem}-manifest.json").read_text())
    jsonschema.validate(manifest, _schema("manifest"))
    for name in manifest["files"]:
        assert (tmp_path / name).exists()
    return report, manifest


@pytest.mark.parametrize("command,extra,suffixes", [
    ("solve-min", [], ["-u.csv"]),
    ("solve-mp", [], ["-z.csv", "-path.csv"]),
    ("obstacle", [], ["-u.csv", "-g.csv"]),
    ("obstacle", ["--init", "zero"], ["-u.csv", "-g.csv"]),
    ("eigen", [], ["-phi1.csv"]),
    ("constants", [], []),
])
def test_toy_subcommands(tmp_path, capsys, command, extra, suffixes):
    assert _run(tmp_path, command, "--preset", "toy-1node", *extra) == 0
    stem = f"toy-1node-{command}"
    report, manifest = _check_outputs(tmp_path, stem, command)
    assert manifest["exit_status"] == 0 and manifest["argv"][0] == command
    assert json.loads(capsys.readouterr().out) == report
    for s in suffixes:
        assert (tmp_path / f"{stem}{s}").exists()


def test_toy_values_through_cli(tmp_path):
    main(["solve-min", "--preset", "toy-1node", "--out", str(tmp_path)])
    main(["solve-mp", "--preset", "toy-1node", "--out", str(tmp_path)])
    u = json.loads((tmp_path / "toy-1node-solve-min.json").read_text())["report"]
    z = json.loads((tmp_path / "toy-1node-solve-mp.json").read_text())["report"]
    assert u["level"] == pytest.approx(-0.5585, abs=1e-3)
    assert z["level"] == pytest.approx(0.2011, abs=1e-3)


def test_sweep_and_radial(tmp_path):
    assert _run(tmp_path, "sweep", "--preset", "toy-1node", "--m-list", "10,20,40") == 0
    report, _ = _check_outputs(tmp_path, "toy-1node-sweep", "sweep")
    assert [r["m"] for r in report["sweep"]["records"]] == [10.0, 20.0, 40.0]
    assert (tmp_path / "toy-1node-sweep-records.csv").exists()
    assert _run(tmp_path, "radial", "--p", "4", "--dim", "1", "--sweep", "4,6", "--scan", "5,50") == 0
    report, _ = _check_outputs(tmp_path, "radial", "radial")
    assert report["profile"]["U0"] == pytest.approx(1.85407, abs=1e-4)
    assert len(report["scan"]) == 4


def test_interval_constants_and_eigen(tmp_path):
    assert _run(tmp_path, "constants", "--preset", "interval-pi", "--psi", "sin") == 0
    report, _ = _check_outputs(tmp_path, "interval-pi-constants", "constants")
    assert report["scaling"]["Lambda_psi"] == pytest.approx(8 / 3, abs=2e-2)
    assert report["Lambda_floor"] == pytest.approx(2.0, abs=2e-2)
    assert _run(tmp_path, "eigen", "--preset", "interval-pi") == 0
    report, _ = _check_outputs(tmp_path, "interval-pi-eigen", "eigen")
    assert report["lambda1"] == pytest.approx(1.0, abs=1e-4)


def test_output_directory_from_environment(tmp_path, monkeypatch):
    monkeypatch.setenv("PENALAB_OUT", str(tmp_path / "env"))
    assert main(["eigen", "--preset", "toy-1node"]) == 0
    assert (tmp_path / "env" / "toy-1node-eigen.json").exists()


def test_errors_exit_one(tmp_path, capsys):
    bad = tmp_path / "bad.json"
    bad.write_text('{\n  "domain": {"kind": "interval", "n": 11},\n  "lambda": 3,\n  "p": 1.5\n}')
    assert main(["solve-min", "--config", str(bad), "--out", str(tmp_path)]) == 1
    assert "line 4" in capsys.readouterr().err
    assert main(["solve-min", "--out", str(tmp_path)]) == 1
    assert main(["radial", "--out", str(tmp_path)]) == 1
    assert main(["radial", "--p", "7", "--dim", "3", "--out", str(tmp_path)]) == 1
    assert main(["obstacle", "--preset", "toy-1node", "--init", str(tmp_path / "nope.csv"),
                 "--out", str(tmp_path)]) == 1
    with pytest.raises(SystemExit) as info:
        main(["solve-min", "--preset", "no-such-preset"])
    assert info.value.code == 1
    with pytest.raises(SystemExit) as info:
        main(["frobnicate"])
    assert info.value.code == 1


def test_config_schema_accepts_presets():
    from penalab.config import PRESETS, preset
    for name in PRESETS:
        jsonschema.validate(preset(name).to_dict(), _schema("config"))


def test_json_writer():
    text = to_json({"b": math.inf, "a": 0.1 + 0.2, "c": [math.nan, 1]})
    assert json.loads(text) == {"a": 0.30000000000000004, "b": None, "c": [None, 1]}
    assert text.index('"a"') < text.index('"b"')


def test_unreachable_tolerance_exits_two(tmp_path):
    cfg = tmp_path / "tight.json"
    cfg.write_text(json.dumps({"name": "tight", "domain": {"kind": "interval", "extents": [0, "pi"], "n": 41},
                               "lambda": 3, "p": 4, "m": 16, "tolerances": {"tol_resid": 1e-30}}))
    assert main(["solve-mp", "--config", str(cfg), "--out", str(tmp_path)]) == 2
    manifest = json.loads((tmp_path / "tight-solve-mp-manifest.json").read_text())
    assert manifest["exit_status"] == 2
