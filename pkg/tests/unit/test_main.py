import json
from pathlib import Path

import pandas as pd
import pytest

from main import EXIT_CONFIG, EXIT_OK, build_parser, main


@pytest.fixture
def small_config(tmp_path: Path) -> Path:
    """Example 1 cut down to two short trials."""
    document = {
        "seed": 1,
        "plant": {"a": [-2], "W": 60, "V": 2},
        "code": {"n": 15, "k": 3, "p": 0.5},
        "channel": {"epsilon": 0.3},
        "quantizer": {"bits": 3, "delta": 16},
        "mode": "no_feedback",
        "horizon": 20,
        "initial": {"width": 4},
        "trials": 2,
        "sweep": {"codes": 1},
    }
    path = tmp_path / "small.json"
    path.write_text(json.dumps(document))
    return path


def test_parser_requires_plant_coefficients():
    """Missing --a is a usage error with exit code 2."""
    with pytest.raises(SystemExit) as excinfo:
        build_parser().parse_args(["bounds", "--n", "15"])
    assert excinfo.value.code == 2


def test_bounds_prints_thresholds(tmp_path: Path, capsys: pytest.CaptureFixture):
    """Scalar example over BEC(0.3): spectral line, existence exponent and limit row."""
    target = tmp_path / "thresholds.csv"
    code = main(["bounds", "--a=-2", "--n=15", "--bec=0.3", "--k", "6", "--csv", str(target)])

    out = capsys.readouterr().out
    assert code == EXIT_OK
    assert "lambda(F)=2.0000" in out

    table = pd.read_csv(target)
    assert table.loc[0, "exponent"] == pytest.approx(0.1142, abs=5e-4)
    assert table.columns.tolist() == ["formula", "rate", "exponent", "n_rate", "n_exponent", "rate_bound", "k_min"]
    assert len(table) == 4
    limit = table.iloc[-1]
    assert limit["formula"] == "limit"
    assert limit["n_rate"] == pytest.approx(1.0)
    assert limit["n_exponent"] == pytest.approx(2.0)
    assert limit["k_min"] == 1
    assert "limit R > 0.066667" in out


def test_bounds_tabulates_limiting_case(capsys: pytest.CaptureFixture):
    """--limit-ns prints one row per N, with ellipsoid columns for m >= 2."""
    assert main(["bounds", "--a=-2,0.25", "--n=15", "--limit-ns", "15,60"]) == EXIT_OK

    out = capsys.readouterr().out
    assert "N=15 " in out
    assert "N=60 " in out
    assert "R_e=" in out


def test_bounds_rejects_invalid_channel_uses():
    """n = 0 exits with the configuration code."""
    assert main(["bounds", "--a=-2", "--n=0"]) == EXIT_CONFIG


def test_sample_code_then_encode(tmp_path: Path, capsys: pytest.CaptureFixture):
    """Sampled code file round-trips through encode; outputs are systematic."""
    assert main(["sample-code", "--n", "15", "--k", "3", "--seed", "5", "--out-dir", str(tmp_path)]) == EXIT_OK
    code_file = tmp_path / "code.txt"
    assert code_file.read_text().splitlines()[1].startswith("n=15 k=3")
    assert "code.txt" in json.loads((tmp_path / "manifest.json").read_text())["files"]

    messages = tmp_path / "messages.txt"
    messages.write_text("101\n000\n111\n")
    capsys.readouterr()
    assert main(["encode", "--code", str(code_file), "--messages", str(messages)]) == EXIT_OK

    rows = [line for line in capsys.readouterr().out.splitlines() if set(line) <= {"0", "1"} and line]
    assert len(rows) == 3
    assert all(len(row) == 15 for row in rows)
    assert rows[0][:3] == "101"


def test_encode_rejects_bad_message_rows(tmp_path: Path):
    """Message rows with non-binary characters are a configuration error."""
    assert main(["sample-code", "--n", "4", "--k", "2", "--out-dir", str(tmp_path)]) == EXIT_OK
    messages = tmp_path / "messages.txt"
    messages.write_text("10\n1x\n")

    assert main(["encode", "--code", str(tmp_path / "code.txt"), "--messages", str(messages)]) == EXIT_CONFIG


def test_sample_code_rejects_invalid_parameters(tmp_path: Path):
    """k = n is rejected with the configuration code."""
    assert main(["sample-code", "--n", "3", "--k", "3", "--out-dir", str(tmp_path)]) == EXIT_CONFIG


def test_simulate_is_reproducible(tmp_path: Path, small_config: Path):
    """Same config and seed give byte-identical artifacts."""
    for run in ("a", "b"):
        assert main(["simulate", str(small_config), "--out-dir", str(tmp_path / run)]) == EXIT_OK

    for name in ("trajectory.csv", "metrics.csv", "manifest.json"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()

    trajectory = pd.read_csv(tmp_path / "a" / "trajectory.csv")
    assert trajectory.columns.tolist() == ["t", "x_1", "u_1", "xhat_1", "width_1", "d", "desync"]
    assert len(trajectory) == 20
    assert len(pd.read_csv(tmp_path / "a" / "metrics.csv")) == 2


def test_simulate_seed_flag_changes_outputs(tmp_path: Path, small_config: Path):
    """--seed overrides the config seed and is recorded in the manifest."""
    assert main(["simulate", str(small_config), "--out-dir", str(tmp_path / "a")]) == EXIT_OK
    assert main(["simulate", str(small_config), "--seed", "99", "--out-dir", str(tmp_path / "b")]) == EXIT_OK

    manifest = json.loads((tmp_path / "b" / "manifest.json").read_text())
    assert manifest["seeds"]["master"] == 99
    assert (tmp_path / "a" / "trajectory.csv").read_bytes() != (tmp_path / "b" / "trajectory.csv").read_bytes()


def test_simulate_invalid_config_exits_with_config_code(tmp_path: Path, small_config: Path):
    """A zero horizon fails validation before any simulation."""
    document = json.loads(small_config.read_text())
    document["horizon"] = 0
    small_config.write_text(json.dumps(document))

    assert main(["simulate", str(small_config), "--out-dir", str(tmp_path / "out")]) == EXIT_CONFIG


def test_reliability_noiseless_channel(tmp_path: Path):
    """Erasure-free channel gives an all-zero reliability table."""
    code = main(
        ["reliability", "--epsilon", "0", "--horizon", "10", "--trials", "2", "--out-dir", str(tmp_path)]
    )

    assert code == EXIT_OK
    table = pd.read_csv(tmp_path / "reliability.csv")
    assert table.columns.tolist() == ["d", "count", "freq", "log2freq"]
    assert (table["freq"] == 0).all()
    assert (table["count"] == 0).all()
    histogram = pd.read_csv(tmp_path / "delay_histogram.csv")
    assert histogram.loc[0, "steps"] == 2 * 10


def test_sweep_single_code(tmp_path: Path, small_config: Path):
    """One code per variant gives a sweep row and a step CDF."""
    assert main(["sweep", str(small_config), "--out-dir", str(tmp_path)]) == EXIT_OK

    sweep = pd.read_csv(tmp_path / "sweep_k3_delta16.csv")
    cdf = pd.read_csv(tmp_path / "cdf_k3_delta16.csv")
    assert len(sweep) == 1
    assert cdf["fraction"].tolist() == [1.0]


def test_sweep_requires_code_count(tmp_path: Path, small_config: Path):
    """Sweeping without a sweep section or --codes is a configuration error."""
    document = json.loads(small_config.read_text())
    del document["sweep"]
    small_config.write_text(json.dumps(document))

    assert main(["sweep", str(small_config), "--out-dir", str(tmp_path)]) == EXIT_CONFIG
