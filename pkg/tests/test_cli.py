import csv
import json
import math

import pytest

from thermoform import __version__
from thermoform.cli import ConfigError, main, parse_rule, validate

LUROTH_G = {0.6: 1.6127001660118921811, 0.75: 0.69860134388944075263,
            0.9: 0.22678053040368838869, 1.0: 0.0}


def run(tmp_path, command, cfg, *extra, name="run"):
    out = tmp_path / name
    out.mkdir(exist_ok=True)
    path = tmp_path / f"{name}.json"
    path.write_text(json.dumps(cfg))
    rc = main([command, "--config", str(path), "--out", str(out), *extra])
    return rc, out


def read_csv(path):
    lines = path.read_text().splitlines()
    assert lines[0].startswith(f"# thermoform {__version__} config ")
    return list(csv.DictReader(lines[1:]))


# ------------------------------------------------------------ pressure

def test_luroth_pressure_rows(tmp_path):
    rc, out = run(tmp_path, "pressure", {"model": {"name": "luroth"},
                                         "pressure": {"t_grid": [0.6, 0.75, 0.9, 1.0]}})
    assert rc == 0
    rows = read_csv(out / "pressure.csv")
    assert len(rows) == 4
    for r in rows:
        assert abs(float(r["G"]) - LUROTH_G[float(r["t"])]) < 1e-6
    assert abs(json.loads((out / "pressure.json").read_text())["G_at_1"]) < 1e-6


def test_binary_pressure_closed_form(tmp_path):
    rc, out = run(tmp_path, "pressure", {"model": {"name": "nary", "N": 2},
                                         "pressure": {"t_grid": [0.25, 0.5, 1.0, 2.0, 3.5]}})
    assert rc == 0
    for r in read_csv(out / "pressure.csv"):
        t = float(r["t"])
        assert abs(float(r["G"]) - (1.0 - t) * math.log(2)) < 1e-12


@pytest.mark.parametrize("cfg", [
    {"model": {"name": "gauss"}, "pressure": {"A": -5}},
    {"model": {"name": "gauss"}, "pressure": {"t_grid": [0.8, -1.0]}},
    {"model": {"name": "gauss", "colour": 3}},
    {"modle": {"name": "gauss"}},
    {"model": {"name": "nonexistent"}},
    {"model": {"name": "mp", "alpha": 1.5}},
    {"threads": 0},
])
def test_malformed_configs_exit_2(tmp_path, cfg):
    rc, _ = run(tmp_path, "pressure", cfg)
    assert rc == 2


def test_invalid_json_exit_2(tmp_path):
    path = tmp_path / "bad.json"
    path.write_text("{model: gauss")
    assert main(["pressure", "--config", str(path), "--out", str(tmp_path)]) == 2


# ------------------------------------------------------------ dimension

def test_gauss_zero_exponent(tmp_path):
    rc, out = run(tmp_path, "dimension", {"model": {"name": "gauss"},
                                          "target": {"rule": "exp u=0"}})
    assert rc == 0
    assert json.loads((out / "dimension.json").read_text())["solution"]["T"] == pytest.approx(
        1.0, abs=1e-10)


def test_binary_half_dimension(tmp_path):
    rc, out = run(tmp_path, "dimension", {"model": {"name": "nary", "N": 2},
                                          "target": {"rule": "exp u=log 2"}})
    assert rc == 0
    T = json.loads((out / "dimension.json").read_text())["solution"]["T"]
    assert abs(T - 0.5) <= 1e-10


def test_mp_indifferent_point_assertion(tmp_path):
    rc, out = run(tmp_path, "dimension", {"model": {"name": "mp", "alpha": 0.5},
                                          "target": {"rule": "exp 1"},
                                          "dimension": {"compare_x": [0.0, 0.3]}})
    assert rc == 0
    d = json.loads((out / "dimension.json").read_text())
    assert d["assertion"] == {"T(x=0) > T(x!=0)": True}
    by_x = {r["x"]: r for r in d["by_x"]}
    assert by_x[0.0]["u_effective"] == 0.5 and by_x[0.3]["u_effective"] == 1.0


# ------------------------------------------------------------ cantor, simulate, diagnose

def test_cantor_bernoulli(tmp_path):
    rc, out = run(tmp_path, "cantor", {"model": {"name": "bernoulli"},
                                       "target": {"rule": "linear 1"}, "cantor": {"levels": 6}})
    assert rc == 0
    d = json.loads((out / "cantor.json").read_text())
    assert abs(d["D_minus"] - 0.5) < 0.05
    assert len(d["tree"]["levels"]) == 6
    assert not d["frostman"]["growth_detected"]
    assert len(read_csv(out / "levels.csv")) == 6
    read_csv(out / "prefix_counts.csv")


def test_simulate_report(tmp_path):
    rc, out = run(tmp_path, "simulate", {"model": {"name": "gauss"},
                                         "experiment": {"radius_rule": "n**-2",
                                                        "orbit_count": 500, "horizon_n": 500}})
    assert rc == 0
    d = json.loads((out / "simulate.json").read_text())
    assert d["fraction_hit_after"] <= 0.05
    assert d["box_calibration"]["within_0.03"]
    assert sum(int(r["orbits"]) for r in read_csv(out / "hits.csv")) == 500


def test_diagnose_lists_injected_fault(tmp_path):
    rc, out = run(tmp_path, "diagnose", {"model": {"name": "bernoulli"},
                                         "diagnose": {"depth": 5,
                                                      "perturb": {"word": [0, 1],
                                                                  "factor": 1.5}}})
    assert rc == 0  # a flagged hypothesis is a warning, not an error
    d = json.loads((out / "diagnose.json").read_text())
    assert d["violations"]


def test_diagnose_clean_measure(tmp_path):
    rc, out = run(tmp_path, "diagnose", {"model": {"name": "bernoulli"},
                                         "diagnose": {"depth": 5}})
    assert rc == 0
    assert json.loads((out / "diagnose.json").read_text())["violations"] == []


# ------------------------------------------------------------ provenance and determinism

def test_every_output_is_stamped(tmp_path):
    rc, out = run(tmp_path, "cantor", {"model": {"name": "bernoulli"}, "cantor": {"levels": 3}})
    assert rc == 0
    stamps = set()
    for f in out.iterdir():
        text = f.read_text()
        if f.suffix == ".json":
            d = json.loads(text)
            assert d["version"] == __version__
            stamps.add(d["config_hash"])
        else:
            stamps.add(text.splitlines()[0].split()[-1])
    assert len(stamps) == 1


def test_rerun_is_byte_identical_across_threads(tmp_path):
    cfg = {"model": {"name": "gauss"}, "seed": 3,
           "experiment": {"radius_rule": "0.25/n", "orbit_count": 300, "horizon_n": 300,
                          "chunk": 50}}
    _, a = run(tmp_path, "simulate", cfg, "--threads", "1", name="a")
    _, b = run(tmp_path, "simulate", cfg, "--threads", "4", name="b")
    for f in a.iterdir():
        assert f.read_bytes() == (b / f.name).read_bytes()


def test_seed_changes_hash(tmp_path):
    cfg = {"model": {"name": "nary", "N": 2}, "pressure": {"t_grid": [0.5]}}
    _, a = run(tmp_path, "pressure", cfg, "--seed", "1", name="a")
    _, b = run(tmp_path, "pressure", cfg, "--seed", "2", name="b")
    assert (a / "pressure.csv").read_text() != (b / "pressure.csv").read_text()


# ------------------------------------------------------------ helpers

def test_rule_parser():
    assert parse_rule("linear 2") == {"kind": "linear", "v": 2.0}
    assert parse_rule("power c=0.5 p=1") == {"kind": "power", "c": 0.5, "p": 1.0}
    assert parse_rule("exp u=log 2")["u"] == pytest.approx(math.log(2), abs=1e-15)
    for bad in ("cubic 3", "exp -1", "linear 0", "power 1"):
        with pytest.raises(ConfigError):
            parse_rule(bad)


def test_validate_passes_known_sections():
    cfg = {"model": {"name": "gauss", "A": 100}, "cantor": {"levels": 4}, "seed": 0}
    assert validate(cfg) is cfg
