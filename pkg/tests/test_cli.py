import io
import json
import os
import re
import subprocess
import sys

import pandas as pd
import pytest

import main
from helpers import write_csv

ROOT = os.path.dirname(os.path.dirname(os.path.abspath(__file__)))

CONFIG = {
    "assumptions": {
        "arrival": {"kind": "uniform_random"},
        "feedback": {"kind": "impute_mar", "level": "user"},
        "candidate_policy": "all_items",
        "episode_length_max": 30,
    },
    "reward": {"kind": {"kind": "rating"}, "missing_policy": "treat_as_min", "bounds": [0.0, 1.0], "normalize": True},
    "state": {"stages": [{"kind": "user_id_one_hot"}, {"kind": "context_key", "name": "hour", "missing_default": 0.0}]},
    "seed": 7,
}


def author(tmp_path, csv, name="env", seed=7):
    config_path = tmp_path / f"{name}.config.json"
    config_path.write_text(json.dumps(dict(CONFIG, seed=seed)), encoding="utf-8")
    out = str(tmp_path / f"{name}.rsenv.json")
    assert main.main(["create-manifest", "--input", csv, "--config", str(config_path), "--out", out]) == 0
    return out


def read(path):
    with open(path, "rb") as f:
        return f.read()


def estimates(capsys, argv):
    assert main.main(argv) == 0
    return pd.read_csv(io.StringIO(capsys.readouterr().out), keep_default_na=False).set_index("estimator")


# ===================== VALIDATE DATA =====================
def test_validate_data_prints_report(capsys, ratings_csv):
    assert main.main(["validate-data", "--input", ratings_csv]) == 0
    out = capsys.readouterr().out
    assert re.search(r"density\s+\d\.\d{4}", out)
    assert re.search(r"event_count\s+50", out)


def test_validate_data_reports_bad_row(capsys, tmp_path):
    csv = write_csv(
        tmp_path / "bad.csv",
        ["user_id", "item_id", "feedback", "timestamp", "propensity"],
        [("a", "x", 1, 1, 0.0)],
    )
    assert main.main(["validate-data", "--input", csv]) == 2
    assert "row 1" in capsys.readouterr().err


def test_validate_data_with_inline_schema(tmp_path):
    csv = write_csv(tmp_path / "ml.csv", ["userId", "movieId", "rating", "ts"], [("1", "10", 4.5, 100)])
    schema = "user_id=userId,item_id=movieId,feedback=rating,timestamp=ts,propensity=none,feedback_range=0.5:5"
    assert main.main(["validate-data", "--input", csv, "--schema", schema]) == 0


def test_missing_required_flag_is_usage_error():
    with pytest.raises(SystemExit) as info:
        main.main(["validate-data"])
    assert info.value.code == 3


def test_missing_input_file(tmp_path):
    assert main.main(["validate-data", "--input", str(tmp_path / "absent.csv")]) == 2


# ===================== RUN =====================
def test_run_is_reproducible(tmp_path, ratings_csv):
    manifest = author(tmp_path, ratings_csv)
    outs = []
    for name in ("first", "second"):
        out = tmp_path / name
        assert main.main(["run", "--manifest", manifest, "--policy", "random", "--steps", "120", "--seed", "7", "--out", str(out)]) == 0
        outs.append(out)
    for artifact in ("trajectory.csv", "report.json", "reward_curve.svg"):
        assert read(outs[0] / artifact) == read(outs[1] / artifact)

    report = json.loads(read(outs[0] / "report.json"))
    trajectory = pd.read_csv(outs[0] / "trajectory.csv")
    assert report["steps"] == len(trajectory) == 120
    assert report["cumulative_reward"] == pytest.approx(trajectory["reward"].sum())
    assert report["trajectory"] == "trajectory.csv"


def test_run_zero_steps(tmp_path, ratings_csv):
    manifest = author(tmp_path, ratings_csv)
    out = tmp_path / "empty"
    assert main.main(["run", "--manifest", manifest, "--policy", "random", "--steps", "0", "--out", str(out)]) == 0
    assert read(out / "trajectory.csv") == b"step,reward,user,action\n"
    assert json.loads(read(out / "report.json"))["cumulative_reward"] == 0.0


def test_run_several_seeds(capsys, tmp_path, ratings_csv):
    manifest = author(tmp_path, ratings_csv)
    capsys.readouterr()
    out = tmp_path / "multi"
    assert main.main(["run", "--manifest", manifest, "--policy", "linucb", "--params", "alpha=0.5", "--steps", "40", "--seed", "7,8", "--out", str(out)]) == 0
    assert (out / "seed-7" / "report.json").is_file()
    assert (out / "seed-8" / "report.json").is_file()
    printed = capsys.readouterr().out.splitlines()
    assert [line.split()[1] for line in printed] == ["7", "8"]


def test_run_unknown_policy(tmp_path, ratings_csv):
    manifest = author(tmp_path, ratings_csv)
    assert main.main(["run", "--manifest", manifest, "--policy", "thompson", "--steps", "5", "--out", str(tmp_path / "x")]) == 4


def test_run_tampered_dataset(tmp_path, ratings_csv):
    manifest = author(tmp_path, ratings_csv)
    with open(ratings_csv, "a", encoding="utf-8") as f:
        f.write("u9,i9,3,99,3\n")
    assert main.main(["run", "--manifest", manifest, "--policy", "random", "--steps", "5", "--out", str(tmp_path / "x")]) == 2


def test_run_negative_steps(tmp_path, ratings_csv):
    manifest = author(tmp_path, ratings_csv)
    assert main.main(["run", "--manifest", manifest, "--policy", "random", "--steps", "-1", "--out", str(tmp_path / "x")]) == 3


@pytest.mark.parametrize("seed", ["-1", str(2**64)])
def test_run_out_of_range_seed(tmp_path, ratings_csv, seed):
    manifest = author(tmp_path, ratings_csv)
    assert main.main(["run", "--manifest", manifest, "--policy", "random", "--steps", "5", "--seed", seed, "--out", str(tmp_path / "x")]) == 3


def test_separate_processes_agree(tmp_path, ratings_csv):
    manifest = author(tmp_path, ratings_csv)
    fingerprints = []
    for name in ("a", "b"):
        result = subprocess.run(
            [sys.executable, os.path.join(ROOT, "main.py"), "run", "--manifest", manifest,
             "--policy", "epsilon_greedy", "--params", "epsilon=0.2", "--steps", "60", "--out", str(tmp_path / name)],
            capture_output=True, text=True, cwd=ROOT, check=True,
        )
        fingerprints.append(result.stdout.split()[-1])
    assert fingerprints[0] == fingerprints[1]
    assert read(tmp_path / "a" / "trajectory.csv") == read(tmp_path / "b" / "trajectory.csv")


# ===================== OFF-POLICY =====================
def test_ips_over_logged_csv(capsys, logged_csv):
    rows = estimates(capsys, ["evaluate-offpolicy", "--log", logged_csv, "--policy", "constant", "--params", "item=a1", "--estimators", "ips"])
    assert float(rows.loc["ips", "value"]) == 1.0
    assert "overlap" in rows.index


def test_ips_clipped_over_logged_csv(capsys, logged_csv):
    rows = estimates(capsys, ["evaluate-offpolicy", "--log", logged_csv, "--policy", "constant", "--params", "item=a1", "--estimators", "ips", "--clip", "1"])
    assert float(rows.loc["ips", "value"]) == 0.5
    assert rows.loc["ips", "flags"] == "clipped"


def test_zero_overlap_is_flagged_not_fatal(capsys, logged_csv):
    rows = estimates(capsys, ["evaluate-offpolicy", "--log", logged_csv, "--policy", "constant", "--params", "item=a3", "--catalog", "a3", "--estimators", "replay"])
    assert rows.loc["replay", "flags"] == "infeasible"
    assert rows.loc["replay", "value"] == ""
    assert rows.loc["overlap", "flags"] == "infeasible"


def test_direct_method_with_constant_model(capsys, logged_csv):
    rows = estimates(capsys, ["evaluate-offpolicy", "--log", logged_csv, "--policy", "constant", "--params", "item=a1", "--estimators", "dm", "--reward-model", "constant:0.7"])
    assert float(rows.loc["dm", "value"]) == pytest.approx(0.7)


def test_estimates_written_to_file(tmp_path, logged_csv):
    out = tmp_path / "estimates.csv"
    assert main.main(["evaluate-offpolicy", "--log", logged_csv, "--policy", "random", "--estimators", "replay,ips,snips,dm,dr", "--out", str(out)]) == 0
    frame = pd.read_csv(out, keep_default_na=False)
    assert frame["estimator"].tolist()[-1] == "overlap"
    assert len(frame) == 6


def test_unknown_estimator_is_usage_error(logged_csv):
    assert main.main(["evaluate-offpolicy", "--log", logged_csv, "--policy", "random", "--estimators", "magic"]) == 3


def test_missing_propensity_is_data_error(ratings_csv):
    assert main.main(["evaluate-offpolicy", "--log", ratings_csv, "--policy", "random", "--estimators", "ips"]) == 2


# ===================== COMPARE =====================
def test_compare_same_manifest(capsys, tmp_path, ratings_csv):
    manifest = author(tmp_path, ratings_csv)
    runs = tmp_path / "runs"
    assert main.main(["run", "--manifest", manifest, "--policy", "random", "--steps", "20", "--seed", "1,2", "--out", str(runs)]) == 0
    out = tmp_path / "compare.csv"
    assert main.main(["compare", "--reports", str(runs), "--out", str(out)]) == 0
    frame = pd.read_csv(out, keep_default_na=False)
    assert frame["seed"].tolist() == [1, 2]
    assert set(frame["mixed_group"]) == {""}


def test_compare_refuses_mixed_manifests(tmp_path, ratings_csv):
    runs = tmp_path / "runs"
    for name, seed in (("one", 1), ("two", 2)):
        manifest = author(tmp_path, ratings_csv, name=name, seed=seed)
        assert main.main(["run", "--manifest", manifest, "--policy", "random", "--steps", "10", "--out", str(runs / name)]) == 0

    assert main.main(["compare", "--reports", str(runs)]) == 5

    out = tmp_path / "mixed.csv"
    assert main.main(["compare", "--reports", str(runs), "--allow-mixed", "--out", str(out)]) == 0
    frame = pd.read_csv(out, keep_default_na=False)
    assert len(set(frame["mixed_group"])) == 2
    assert all(frame["mixed_group"])


def test_compare_without_reports(tmp_path):
    assert main.main(["compare", "--reports", str(tmp_path)]) == 3
