"""Command-line interface and campaign output files."""

import json
import os

import pytest

from hetnet_uplink.cli import main
from hetnet_uplink.config import SimConfig

SMALL = ["--users", "3", "--femtos", "2", "--random-femtos",
         "--subchannels", "3", "--macro-subchannels", "3",
         "--drops", "2", "--seed", "9"]


def run_small(out_dir, extra=()):
    return main(["run", *SMALL, "--output", str(out_dir), *extra])


def read_files(out_dir):
    files = {}
    for name in ("results.json", "user_rates.csv", "rate_cdf.csv"):
        with open(os.path.join(out_dir, name), "rb") as fh:
            files[name] = fh.read()
    return files


def test_run_writes_expected_files(tmp_path, capsys):
    assert run_small(tmp_path / "out") == 0
    printed = capsys.readouterr().out
    assert "mean_sum_rate=" in printed and "outage=" in printed
    files = read_files(tmp_path / "out")
    doc = json.loads(files["results.json"])
    assert doc["schema_version"] == 1
    assert len(doc["drops"]) == 2
    assert doc["report"]["mean_sum_rate"] > 0
    # config echo round-trips through the schema
    echoed = SimConfig.from_dict(doc["config"])
    assert echoed.num_users == 3
    assert echoed.seed == 9
    header, *rows = files["user_rates.csv"].decode().strip().split("\n")
    assert header == "drop,user,rate_bpshz"
    assert len(rows) == 2 * 3  # drops x users
    assert files["rate_cdf.csv"].decode().startswith("rate,cdf")


def test_rerun_is_byte_identical(tmp_path):
    out = tmp_path / "a"
    assert run_small(out) == 0
    first = read_files(out)
    assert run_small(out) == 0
    assert read_files(out) == first


def test_flags_override_config_file(tmp_path, capsys):
    cfg_file = tmp_path / "cfg.json"
    cfg_file.write_text(json.dumps({"num_users": 3, "num_femtos": 2,
                                    "num_subchannels": 3,
                                    "macro_subchannels": 3,
                                    "femto_positions": [[100.0, 0.0],
                                                        [-100.0, 0.0]],
                                    "drops": 1, "seed": 1}))
    out = tmp_path / "out"
    code = main(["run", "--config", str(cfg_file), "--seed", "5",
                 "--output", str(out)])
    assert code == 0
    doc = json.loads((out / "results.json").read_text())
    assert doc["config"]["seed"] == 5        # flag wins
    assert doc["config"]["num_users"] == 3   # file value kept


def test_output_dir_env_resolves_relative_paths(tmp_path, monkeypatch):
    monkeypatch.setenv("HETNET_OUTPUT_DIR", str(tmp_path))
    monkeypatch.chdir(tmp_path)
    assert run_small("rel_out") == 0
    assert (tmp_path / "rel_out" / "results.json").exists()


def test_single_drop_single_user_gets_positive_rate(tmp_path):
    out = tmp_path / "out"
    code = main(["run", "--users", "1", "--femtos", "0", "--subchannels", "2",
                 "--macro-subchannels", "2", "--drops", "1", "--seed", "3",
                 "--config", str(_no_femto_config(tmp_path)),
                 "--output", str(out)])
    assert code == 0
    doc = json.loads((out / "results.json").read_text())
    assert doc["drops"][0]["sum_rate"] > 0


def _no_femto_config(tmp_path):
    path = tmp_path / "nf.json"
    path.write_text(json.dumps({"num_femtos": 0, "femto_positions": []}))
    return path


def test_baseline_algorithm_flag(tmp_path):
    out = tmp_path / "out"
    assert run_small(out, extra=["--algorithm", "max-sinr"]) == 0
    doc = json.loads((out / "results.json").read_text())
    assert doc["config"]["algorithm"] == "max-sinr"


def test_sweep_writes_summary_and_subdirs(tmp_path, capsys):
    out = tmp_path / "sw"
    code = main(["sweep", *SMALL, "--output", str(out),
                 "--parameter", "macro_subchannels", "--values", "1,3"])
    assert code == 0
    printed = capsys.readouterr().out
    assert "macro_subchannels=1" in printed
    summary = (out / "sweep_summary.csv").read_text().strip().split("\n")
    assert summary[0] == "value,mean_sum_rate,stderr_sum_rate"
    assert len(summary) == 3
    for v in (1, 3):
        assert (out / f"macro_subchannels={v}" / "results.json").exists()


def test_sweep_rejects_bad_values(capsys):
    assert main(["sweep", *SMALL, "--parameter", "num_users",
                 "--values", "5,banana"]) == 2
    assert "error:" in capsys.readouterr().err


def test_sweep_rejects_unknown_parameter():
    with pytest.raises(SystemExit):
        main(["sweep", *SMALL, "--parameter", "area_side", "--values", "1"])


def test_invalid_config_value_exits_2(capsys):
    assert main(["run", "--users", "0"]) == 2
    assert "error:" in capsys.readouterr().err


def test_missing_config_file_exits_2(capsys):
    assert main(["run", "--config", "/nonexistent/cfg.json"]) == 2
    assert "error:" in capsys.readouterr().err
