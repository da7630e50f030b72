import csv
import json

import pytest

from spinamp.cli import (
    EXIT_CAPACITY,
    EXIT_CONFIG,
    EXIT_OK,
    EXIT_USAGE,
    _layers_for_size,
    main,
)
from spinamp.lattice import site_count


def read_manifest(out_dir):
    return json.loads((out_dir / "manifest.json").read_text())


def test_layers_for_size():
    for size in (1, 10, 10**5, 10**6, 10**7):
        L = _layers_for_size(size)
        assert site_count(L) >= size
        assert L == 1 or site_count(L - 1) < size


def test_ideal_command(tmp_path):
    rc = main(["ideal", "-L", "12", "-p", "10", "--out-dir", str(tmp_path)])
    assert rc == EXIT_OK
    rows = list(csv.DictReader((tmp_path / "trace.csv").open()))
    assert len(rows) == 10
    assert rows[0]["species"] == "B"
    assert int(rows[-1]["up_count"]) == site_count(11)  # 10 phases fill 11 layers
    man = read_manifest(tmp_path)
    assert man["command"] == "ideal"
    assert man["config"]["final_up_count"] == site_count(11)
    assert str(tmp_path / "trace.csv") in man["outputs"]


def test_ideal_command_usage_errors(tmp_path):
    assert main(["ideal", "-L", "5", "-p", "5", "--out-dir", str(tmp_path)]) == EXIT_USAGE
    with pytest.raises(SystemExit):
        main(["ideal", "-L", "5", "-p", "3", "--seed", "2"])


def test_ideal_verify_mode_matches(tmp_path):
    fast = tmp_path / "fast"
    slow = tmp_path / "slow"
    assert main(["ideal", "-L", "15", "-p", "13", "--out-dir", str(fast)]) == EXIT_OK
    assert main(
        ["ideal", "-L", "15", "-p", "13", "--verify", "--out-dir", str(slow)]
    ) == EXIT_OK
    assert (fast / "trace.csv").read_bytes() == (slow / "trace.csv").read_bytes()


def mc_config(tmp_path, **overrides):
    doc = {
        "schema_version": 1,
        "L": [12, 16],
        "eps0": [0.05],
        "eps1": [0.01, 0.05],
        "trials": 3,
        "rng_seed": 9,
        "seed_value": "both",
    }
    doc.update(overrides)
    path = tmp_path / "config.json"
    path.write_text(json.dumps(doc))
    return path


def test_mc_command(tmp_path):
    cfg = mc_config(tmp_path)
    out = tmp_path / "out"
    assert main(["mc", "--config", str(cfg), "--out-dir", str(out)]) == EXIT_OK
    rows = list(csv.DictReader((out / "experiment.csv").open()))
    assert len(rows) == 4  # 2 L values x 2 eps1 values
    assert {r["eps1"] for r in rows} == {"0.01", "0.05"}
    assert all(r["contrast"] != "" for r in rows)
    bundle = json.loads((out / "results.json").read_text())
    assert len(bundle["runs"]) == 4
    assert all(len(r["up_counts"]) == 3 for r in bundle["runs"])
    man = read_manifest(out)
    assert man["rng_seeds"] == [9]


def test_mc_rerun_is_byte_identical_across_threads(tmp_path):
    cfg = mc_config(tmp_path)
    outs = []
    for name, threads in (("a", "1"), ("b", "2"), ("c", "1")):
        out = tmp_path / name
        assert main(
            ["mc", "--config", str(cfg), "--threads", threads, "--out-dir", str(out)]
        ) == EXIT_OK
        outs.append((out / "experiment.csv").read_bytes())
    assert outs[0] == outs[1] == outs[2]


def test_mc_seed_override_changes_results(tmp_path):
    cfg = mc_config(tmp_path, L=[12], eps1=[0.01])
    a, b = tmp_path / "a", tmp_path / "b"
    assert main(["mc", "--config", str(cfg), "--out-dir", str(a)]) == EXIT_OK
    assert main(["mc", "--config", str(cfg), "--seed", "77", "--out-dir", str(b)]) == EXIT_OK
    assert (a / "experiment.csv").read_bytes() != (b / "experiment.csv").read_bytes()


def test_mc_sizes_and_polarization(tmp_path):
    cfg = mc_config(tmp_path)
    doc = json.loads(cfg.read_text())
    del doc["L"]
    del doc["eps0"]
    doc["sizes"] = [500]
    doc["polarization"] = {"value": 0.9, "convention": "population"}
    doc["phases"] = 5
    cfg.write_text(json.dumps(doc))
    out = tmp_path / "out"
    assert main(["mc", "--config", str(cfg), "--out-dir", str(out)]) == EXIT_OK
    rows = list(csv.DictReader((out / "experiment.csv").open()))
    assert len(rows) == 2
    assert rows[0]["size"] == "500"
    assert rows[0]["eps0"] == "0.09999999999999998"  # 1 - 0.9 in floats


@pytest.mark.parametrize(
    "mutate",
    [
        lambda d: d.pop("schema_version"),
        lambda d: d.update(schema_version=2),
        lambda d: d.update(sizes=[100]),  # both sizes and L present
        lambda d: (d.pop("L"), d.pop("eps0")) and None,  # neither sizes nor L
        lambda d: d.update(polarization={"value": 0.9}),  # eps0 and polarization
        lambda d: d.update(rule="quantum"),
        lambda d: d.update(phases=99),  # exceeds L-1
    ],
)
def test_mc_config_errors(tmp_path, mutate):
    cfg = mc_config(tmp_path)
    doc = json.loads(cfg.read_text())
    mutate(doc)
    cfg.write_text(json.dumps(doc))
    assert main(["mc", "--config", str(cfg), "--out-dir", str(tmp_path)]) == EXIT_CONFIG


def test_mc_missing_and_malformed_config(tmp_path):
    assert main(["mc", "--config", str(tmp_path / "nope.json")]) == EXIT_CONFIG
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    assert main(["mc", "--config", str(bad)]) == EXIT_CONFIG


def test_mc_capacity_exit(tmp_path):
    cfg = mc_config(tmp_path, L=[5000], eps1=[0.0], phases=10)
    assert main(["mc", "--config", str(cfg), "--out-dir", str(tmp_path)]) == EXIT_CAPACITY


def test_spectrum_command_compare(tmp_path):
    rc = main(
        ["spectrum", "--geometry", "rhombo60", "-L", "8", "--probe", "layer2",
         "--out-dir", str(tmp_path)]
    )
    assert rc == EXIT_OK
    for name in ("ideal_nn", "full_dipolar", "suppressed"):
        sticks = json.loads((tmp_path / f"sticks_{name}.json").read_text())
        assert sticks["sticks"]
        rows = list(csv.DictReader((tmp_path / f"curve_{name}.csv").open()))
        assert len(rows) == 4096
    man = read_manifest(tmp_path)
    scores = man["config"]["addressability_scores"]
    assert scores["suppressed"] < scores["full-dipolar"]


def test_spectrum_command_single_model(tmp_path):
    rc = main(
        ["spectrum", "--geometry", "cubic", "--model", "full-dipolar",
         "--probe", "1,1,0", "--out-dir", str(tmp_path)]
    )
    assert rc == EXIT_OK
    assert (tmp_path / "sticks_full_dipolar.json").exists()


def test_spectrum_command_usage_errors(tmp_path):
    assert main(
        ["spectrum", "--geometry", "custom", "--out-dir", str(tmp_path)]
    ) == EXIT_USAGE
    assert main(
        ["spectrum", "--probe", "9,9,9", "-L", "4", "--out-dir", str(tmp_path)]
    ) == EXIT_USAGE
    with pytest.raises(SystemExit):
        main(["spectrum", "--probe", "1,2"])
    with pytest.raises(SystemExit):
        main(["spectrum", "--probe", "layer0"])


def test_version_flag(capsys):
    with pytest.raises(SystemExit) as exc:
        main(["--version"])
    assert exc.value.code == 0
