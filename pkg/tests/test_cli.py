import csv
import json
import math

import pytest

from rwcre import __version__
from rwcre.cli import main, run
from rwcre.config import config_hash, load, validate
from rwcre.errors import ConfigError
from rwcre.presets import list_presets, resolve

SYMMETRIC = {"kind": "two-point", "p_low": 0.25, "p_high": 0.75, "weight_low": 0.5}


def write(tmp_path, cfg, name="cfg.json"):
    p = tmp_path / name
    p.write_text(json.dumps(cfg))
    return str(p)


def read_rows(path):
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def test_moments_symmetric_example(tmp_path):
    cfg = {"experiment": "moments", "law": SYMMETRIC, "map": {"kind": "identity"}, "horizons": [1000],
           "replicas": 10000, "seed": 3}
    code, files = run(write(tmp_path, cfg))
    assert code == 0
    rows = {r["name"]: r for r in read_rows(files[0])}
    mean = rows["moments.mean"]
    assert abs(float(mean["estimate"])) < 4 * float(mean["std_error"])
    assert all(r["seed"] == "3" and r["replicas"] == "10000" for r in rows.values())
    manifest = json.loads(open(files[1]).read())
    assert manifest["config_sha256"] == config_hash(cfg)
    assert manifest["version"] == __version__
    assert manifest["outputs"] == ["moments.csv"]


def test_runs_are_byte_identical(tmp_path):
    cfg = {"experiment": "profile", "law": SYMMETRIC, "map": {"kind": "polynomial", "a": 1.5},
           "horizons": [500, 2000], "replicas": 700, "seed": 11}
    path = write(tmp_path, cfg)
    outs = []
    for workers, sub in ((1, "a"), (4, "b")):
        code, files = run(path, workers=workers, out_dir=str(tmp_path / sub))
        assert code == 0
        outs.append(open(files[0], "rb").read())
    assert outs[0] == outs[1]


def test_ellipticity_violation_reports_path(tmp_path, capsys):
    cfg = {"experiment": "moments", "law": {"kind": "two-point", "p_low": 0.0, "p_high": 0.8, "weight_low": 0.5},
           "map": {"kind": "identity"}, "horizons": [10], "replicas": 10, "seed": 1}
    assert main(["run", write(tmp_path, cfg)]) == 2
    err = capsys.readouterr().err
    assert "EllipticityViolation" in err and "law.atoms[0]" in err


@pytest.mark.parametrize("patch,where", [
    ({"seed": -1}, "seed"),
    ({"seed": 2 ** 64}, "seed"),
    ({"experiment": "nope"}, "experiment"),
    ({"map": {"kind": "polynomial", "a": -1}}, "map.a"),
    ({"horizons": [10, "x"]}, "horizons[1]"),
    ({"bogus": 1}, "bogus"),
    ({"law": {"kind": "finite", "atoms": [[0.3, 0.5], [0.7, 0.6]]}}, "law"),
])
def test_config_errors_carry_field_paths(patch, where):
    cfg = {"experiment": "moments", "law": SYMMETRIC, "map": {"kind": "identity"}, "horizons": [10],
           "replicas": 10, "seed": 1, **patch}
    with pytest.raises(ConfigError) as exc:
        validate(cfg)
    assert exc.value.path.startswith(where)


def test_bad_json_is_a_config_error(tmp_path):
    p = tmp_path / "broken.json"
    p.write_text("{not json")
    assert run(str(p))[0] == 2
    assert run(str(tmp_path / "missing.json"))[0] == 2


def test_runtime_estimator_error_exits_3(tmp_path, capsys):
    cfg = {"experiment": "scgf", "law": SYMMETRIC, "map": {"kind": "identity"}, "horizons": [1000],
           "replicas": 50, "seed": 1, "theta_grid": [3.0]}
    code, files = run(write(tmp_path, cfg))
    assert code == 3 and files == []
    assert "EffectiveSampleCollapse" in capsys.readouterr().err


def test_presets_listing(capsys):
    names = [n for n, _ in list_presets()]
    for required in ("identity", "frozen", "poly(A,a)", "exp(B,b)", "counterexample-4k"):
        assert required in names
    assert main(["presets"]) == 0
    out = capsys.readouterr().out
    assert all(n in out for n in names)


def test_critical_preset_resolves_exponent():
    cfg = validate(resolve("critical(1.5)"))
    assert cfg.rmap.params["a"] == pytest.approx(2.0)
    assert resolve("critical")["map"] == {"kind": "critical", "s": 1.5}
    with pytest.raises(ConfigError):
        resolve("critical(3)")
    with pytest.raises(ConfigError):
        resolve("nonexistent")
    with pytest.raises(ConfigError):
        resolve("poly(1,2,3)")


@pytest.mark.parametrize("name", [n for n, _ in list_presets()])
def test_preset_round_trip(tmp_path, name):
    path = str(tmp_path / "preset.json")
    assert main(["preset", name, "--emit", path]) == 0
    cfg = load(path)
    assert cfg.raw == resolve(name)


def test_preset_emit_to_stdout(capsys):
    assert main(["preset", "poly(2,1.5)", "--emit"]) == 0
    cfg = json.loads(capsys.readouterr().out)
    assert cfg["map"] == {"kind": "polynomial", "A": 2.0, "a": 1.5}


def test_explicit_map_from_file(tmp_path):
    (tmp_path / "incs.txt").write_text("3\n1\n\n5\n")
    cfg = {"experiment": "mass-game", "map": {"kind": "explicit", "file": "incs.txt"}, "horizons": [9],
           "values": {"kind": "constant", "value": 0.25}, "seed": 0}
    loaded = load(write(tmp_path, cfg))
    assert loaded.rmap.increments(4)[:3] == [3, 1, 5] and math.isinf(loaded.rmap.increment(4))
    code, files = run(write(tmp_path, cfg))
    assert code == 0
    assert {float(r["estimate"]) for r in read_rows(files[0])} == {0.25}
    with pytest.raises(ConfigError) as exc:
        load(write(tmp_path, {**cfg, "map": {"kind": "explicit", "file": "nope.txt"}}, "b.json"))
    assert exc.value.path.startswith("map")


def test_version(capsys):
    assert main(["version"]) == 0
    assert capsys.readouterr().out.strip() == __version__
