import json

import numpy as np
import pytest

from fracprodi.cli import main
from fracprodi.config import (
    ConfigParseError,
    ConfigRangeError,
    ConfigSchemaError,
    config_hash,
    parse_config,
    parse_config_text,
    serialize_config,
)

BASE = {
    "domain": {"kind": "interval", "a": -1, "b": 1},
    "s": 0.5,
    "n": 100,
    "nonlinearity": {"family": "jumping", "mu_minus": 0.5, "mu_plus": 2.5},
    "rho": -1.0,
    "rho_list": [-1.0, 0.0, 2.0],
    "mc": {"paths": 500, "dt": 0.01, "tmax": 10.0, "seed": 1},
}


def write(tmp_path, cfg, name="cfg.json"):
    path = tmp_path / name
    path.write_text(json.dumps(cfg) if isinstance(cfg, dict) else cfg)
    return path


def run(tmp_path, sub, cfg=BASE, out="out", *extra):
    return main([sub, "--config", str(write(tmp_path, cfg)), "--out", str(tmp_path / out), *extra])


def test_minimal_config_parses():
    cfg = parse_config_text(json.dumps({"domain": {"kind": "interval", "a": -1, "b": 1}, "s": 0.5, "n": 400}))
    assert cfg.n == 400 and cfg.s == 0.5


def test_range_errors():
    with pytest.raises(ConfigRangeError, match="s"):
        parse_config_text(json.dumps({**BASE, "s": 1.5}))
    with pytest.raises(ConfigRangeError) as exc:
        parse_config_text(json.dumps({**BASE, "n": 2}))
    assert exc.value.key == "n"


def test_unknown_key_names_it():
    with pytest.raises(ConfigSchemaError) as exc:
        parse_config_text(json.dumps({**BASE, "alpha": 1}))
    assert exc.value.key == "alpha"
    with pytest.raises(ConfigSchemaError) as exc:
        parse_config_text(json.dumps({**BASE, "mc": {"seed": 1, "bogus": 2}}))
    assert exc.value.key == "mc.bogus"


def test_parse_error_location():
    with pytest.raises(ConfigParseError) as exc:
        parse_config_text('{\n  "s": 0.5,\n  "n": ,\n}')
    assert exc.value.line == 3
    assert exc.value.column == 8


def test_missing_table_file(tmp_path):
    path = write(tmp_path, {**BASE, "V": {"table": "nope.csv"}})
    with pytest.raises(ConfigSchemaError, match="does not exist"):
        parse_config(path)


def test_round_trip():
    cfg = parse_config_text(json.dumps({**BASE, "h": {"phi1": -1.0}, "bracket": [-1, 10]}))
    again = parse_config_text(serialize_config(cfg))
    assert again == cfg
    assert config_hash(again) == config_hash(cfg)


def test_hash_ignores_output_location():
    a = parse_config_text(json.dumps({**BASE, "output": "x"}))
    b = parse_config_text(json.dumps({**BASE, "output": "y"}))
    assert config_hash(a) == config_hash(b)
    assert config_hash(a) != config_hash(parse_config_text(json.dumps({**BASE, "n": 101})))


def test_eigen_command(tmp_path):
    assert run(tmp_path, "eigen") == 0
    doc = json.loads((tmp_path / "out" / "eigen.json").read_text())
    assert doc["lambda_star"] == pytest.approx(1.16, rel=0.01)
    assert doc["header"]["config_sha256"]
    csv = (tmp_path / "out" / "eigenvector.csv").read_text()
    assert csv.startswith("# config_sha256: ")
    assert "# seed: 1" in csv


def test_solve_command(tmp_path):
    assert run(tmp_path, "solve") == 0
    doc = json.loads((tmp_path / "out" / "solve.json").read_text())
    assert set(doc) >= {"lambda_star", "kappa_hat", "residual"}
    assert doc["residual"] < 1e-10


def test_solve_with_table_potential(tmp_path):
    assert run(tmp_path, "solve") == 0
    table = tmp_path / "out" / "solution.csv"
    cfg = {**BASE, "V": {"table": str(table)}}
    assert run(tmp_path, "solve", cfg, "out2") == 0


def test_semilinear_command(tmp_path):
    assert run(tmp_path, "solve-semilinear") == 0
    doc = json.loads((tmp_path / "out" / "semilinear.json").read_text())
    assert doc["status"].startswith("solved_multiple")
    assert (tmp_path / "out" / "solution_1.csv").exists()
    assert run(tmp_path, "solve-semilinear", {**BASE, "rho": 5.0}, "o5") == 1


def test_semilinear_needs_nonlinearity(tmp_path):
    cfg = {k: v for k, v in BASE.items() if k != "nonlinearity"}
    assert run(tmp_path, "solve-semilinear", cfg) == 2


def test_mc_command_and_seed(tmp_path):
    assert run(tmp_path, "mc") == 0
    no_seed = {**BASE, "mc": {"paths": 100, "dt": 0.01}}
    assert run(tmp_path, "mc", no_seed, "o2") == 2
    assert run(tmp_path, "mc", no_seed, "o3", "--seed", "4") == 0
    doc = json.loads((tmp_path / "o3" / "mc.json").read_text())
    assert doc["header"]["seed"] == 4


def test_sweep_command(tmp_path):
    cfg = {**BASE, "bracket": [-1.0, 10.0]}
    assert run(tmp_path, "sweep", cfg) == 0
    summary = json.loads((tmp_path / "out" / "sweep.json").read_text())
    assert set(summary) >= {"rho_star", "tol_rho", "bracket_evals"}
    assert abs(summary["rho_star"]) <= 1e-2
    header = (tmp_path / "out" / "sweep.csv").read_text().splitlines()[3]
    assert header == "rho,status,n_solutions,minimal_sup_norm,sup_u_minus,bound_margin_L35,bound_margin_L36"


def test_sweep_invalid_bracket(tmp_path):
    assert run(tmp_path, "sweep", {**BASE, "rho_list": None, "bracket": [1.0, 10.0]}) == 2


def test_usage_errors(tmp_path):
    assert main(["bogus", "--config", "x"]) == 2
    assert main(["eigen", "--config", str(tmp_path / "missing.json")]) == 2
    assert run(tmp_path, "eigen", '{"s": 0.5,') == 2


def test_validate_byte_identical(tmp_path):
    assert run(tmp_path, "validate", BASE, "a") == 0
    assert run(tmp_path, "validate", BASE, "b") == 0
    for name in ("validate.json", "config.json"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()


def test_sweep_byte_identical(tmp_path):
    assert run(tmp_path, "sweep", BASE, "a") == 0
    assert run(tmp_path, "sweep", BASE, "b") == 0
    assert (tmp_path / "a" / "sweep.csv").read_bytes() == (tmp_path / "b" / "sweep.csv").read_bytes()


def test_disc_eigen(tmp_path):
    cfg = {"domain": {"kind": "ball", "radius": 1.0}, "s": 0.5, "n": 15}
    assert run(tmp_path, "eigen", cfg) == 0
    lines = (tmp_path / "out" / "eigenvector.csv").read_text().splitlines()
    assert lines[3] == "x,y,value"
    vals = np.array([float(r.split(",")[2]) for r in lines[4:]])
    assert vals.max() == 1.0 and vals.min() > 0
