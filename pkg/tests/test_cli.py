import json

import pytest

from relapprox.cli import main
from relapprox.sampling import read_sample_json
from relapprox.set_system import read_json


def run(*argv):
    return main([str(a) for a in argv])


@pytest.fixture()
def interval_file(tmp_path):
    path = tmp_path / "iv.json"
    assert run("generate", "--family", "intervals", "--n", 40, "--out", path) == 0
    return path


def test_generate_families(tmp_path):
    cases = [
        (["--family", "intervals", "--n", "12"], 79),
        (["--family", "power_set", "--n", "3"], 8),
        (["--family", "random", "--n", "10", "--m", "20", "--p", "0.4", "--seed", "1"], None),
        (["--family", "halfplanes", "--points", "6", "--seed", "2"], None),
        (["--family", "rectangles", "--points", "6", "--seed", "2"], None),
    ]
    for argv, expected in cases:
        out = tmp_path / f"{argv[1]}.json"
        assert run("generate", *argv, "--out", out) == 0
        system = read_json(out).system
        if expected is not None:
            assert len(system) == expected


def test_verify_pass_and_fail(tmp_path, interval_file, capsys):
    sample_path = tmp_path / "s.json"
    assert (
        run(
            "sample", "--system", interval_file, "--formula", "basic",
            "--eps", 0.2, "--delta", 0.4, "--gamma", 0.2, "--seed", 5,
            "--out", sample_path,
        )
        == 0
    )
    # basic size exceeds n=40, so the sample is the whole ground set: passes
    code = run(
        "verify", "--system", interval_file, "--sample", sample_path,
        "--eps", 0.2, "--delta", 0.4,
    )
    report = json.loads(capsys.readouterr().out.strip().splitlines()[-1])
    assert code == 0 and report["passes"] is True
    assert set(report) >= {"worst_ratio", "worst_set_index", "t", "eps"}

    tiny = tmp_path / "tiny.json"
    tiny.write_text('{"n": 40, "t": 1, "mode": "without", "members": [7], "seed": null}')
    code = run(
        "verify", "--system", interval_file, "--sample", tiny,
        "--eps", 0.2, "--delta", 0.4,
    )
    assert code == 1


def test_sample_formulas_require_d(tmp_path, interval_file):
    out = tmp_path / "s.json"
    code = run(
        "sample", "--system", interval_file, "--formula", "main",
        "--eps", 0.3, "--delta", 0.4, "--gamma", 0.2, "--seed", 1, "--out", out,
    )
    assert code == 2  # missing --d
    code = run(
        "sample", "--system", interval_file, "--formula", "main",
        "--eps", 0.3, "--delta", 0.4, "--gamma", 0.2, "--seed", 1,
        "--out", out, "--d", 2,
    )
    assert code == 0
    assert read_sample_json(out).t <= 40


def test_halve_writes_sample_and_trace(tmp_path, interval_file, capsys):
    trace_path = tmp_path / "trace.json"
    out_path = tmp_path / "halved.json"
    code = run(
        "halve", "--system", interval_file, "--eps", 0.4, "--delta", 0.5,
        "--gamma", 0.5, "--seed", 3, "--trace", trace_path, "--out", out_path,
    )
    assert code == 0
    doc = json.loads(capsys.readouterr().out.strip().splitlines()[-1])
    assert doc["t"] == read_sample_json(out_path).t
    trace = json.loads(trace_path.read_text())
    assert trace["levels"][0]["set_size_after"] == 40


def test_packing_and_chain_outputs(tmp_path, interval_file):
    pack_path = tmp_path / "packing.json"
    assert run("packing", "--system", interval_file, "--alpha", 8, "--out", pack_path) == 0
    doc = json.loads(pack_path.read_text())
    assert doc["alpha"] == 8.0
    assert len(doc["cover_map"]) == 821  # 40*41/2 + 1 sets

    chain_json = tmp_path / "chain.json"
    assert run("chain", "--system", interval_file, "--eps", 0.3, "--delta", 0.4,
               "--out", chain_json) == 0
    assert json.loads(chain_json.read_text())["k"] == 2

    chain_csv = tmp_path / "chain.csv"
    assert run("chain", "--system", interval_file, "--eps", 0.3, "--delta", 0.4,
               "--out", chain_csv) == 0
    assert chain_csv.read_text().startswith("level,alpha,packing_size")


def test_montecarlo_csv(tmp_path, interval_file):
    spec = tmp_path / "spec.json"
    spec.write_text(
        json.dumps(
            {
                "system": {"path": str(interval_file)},
                "eps": [0.2],
                "delta": [0.4],
                "gamma": [0.2],
                "t": [15, 40],
                "trials": 20,
                "master_seed": 2,
            }
        )
    )
    out = tmp_path / "mc.csv"
    assert run("montecarlo", "--spec", spec, "--out", out) == 0
    lines = out.read_text().strip().splitlines()
    assert lines[0] == "eps,delta,gamma,t,trials,failures,failure_rate,wilson_lo,wilson_hi,seed"
    assert len(lines) == 3
    assert lines[2].split(",")[5] == "0"  # t = n row never fails


@pytest.mark.slow
def test_calibrate_subcommand(tmp_path):
    suite = tmp_path / "suite.json"
    suite.write_text(
        json.dumps(
            {
                "trials": 40,
                "master_seed": 5,
                "cases": [
                    {
                        "name": "iv",
                        "system": {"family": "implicit_intervals", "n": 1200},
                        "eps": 0.2,
                        "delta": 0.5,
                        "gamma": 0.25,
                        "d": 2,
                        "use_for": ["c", "c1"],
                    },
                    {
                        "name": "chain",
                        "system": {"family": "intervals", "n": 80},
                        "eps": 0.25,
                        "delta": 0.4,
                        "gamma": 0.25,
                        "d": 2,
                        "use_for": ["c2", "c3"],
                    },
                ],
            }
        )
    )
    out = tmp_path / "constants.json"
    assert run("calibrate", "--suite", suite, "--out", out) == 0
    doc = json.loads(out.read_text())
    assert doc["calibrated"] is True
    assert {"c", "c1", "c2", "c3"} <= set(doc)


def test_usage_errors_exit_2(tmp_path):
    with pytest.raises(SystemExit) as err:
        run("generate", "--family", "unknown", "--out", tmp_path / "x.json")
    assert err.value.code == 2
    assert run("verify", "--system", tmp_path / "missing.json",
               "--sample", tmp_path / "missing2.json", "--eps", 0.2, "--delta", 0.3) == 2
