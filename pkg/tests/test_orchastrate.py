import pandas as pd
import pytest
from pytest import approx

from src.agents import EpsilonGreedyPolicy, RandomPolicy
from src.core import Action, State
from src.orchastrate import (
    Transcript,
    TranscriptStep,
    build_run_report,
    canonical_json,
    episode_seed,
    run_episodes,
)
from src.synthetic import LinearBanditSimulator, linear_bandit_environment, single_best_item_weights
from src.tools import (
    estimates_csv,
    format_table,
    reward_curve_svg,
    trajectory_frame,
    write_canonical_json,
    write_trajectory_csv,
)


def linear_env(episode_length_max=1_000):
    return linear_bandit_environment(LinearBanditSimulator(single_best_item_weights(), episode_length_max=episode_length_max))


def transcript_of(rewards, seed=0):
    s = State(features=(0.5,), user="u", candidates=("a", "b"), clock=0)
    return Transcript(
        seed=seed,
        steps=[TranscriptStep(t, s, Action(slate=("a", "b")), r, False) for t, r in enumerate(rewards)],
        episodes=1,
    )


# ===================== TRANSCRIPT =====================
def test_cumulative_reward_sums_left_to_right():
    t = transcript_of([0.1, 0.2, 0.3])
    assert t.cumulative_reward == (0.1 + 0.2) + 0.3
    assert t.mean_reward == approx(0.2)
    assert t.cumulative_means() == approx([0.1, 0.15, 0.2])


def test_fingerprint_covers_steps_not_seed():
    base = transcript_of([1.0, 0.0]).fingerprint()
    assert transcript_of([1.0, 0.0], seed=9).fingerprint() == base
    assert transcript_of([1.0, 0.5]).fingerprint() != base


def test_canonical_json():
    assert canonical_json({"b": [1.5, 2], "a": {"d": None, "c": "é"}}) == '{"a":{"c":"é","d":null},"b":[1.5,2]}'
    with pytest.raises(ValueError):
        canonical_json({"x": float("nan")})


def test_episode_seeds():
    assert episode_seed(5, 0) == 5
    assert episode_seed(5, 1) != episode_seed(5, 2)
    assert episode_seed(5, 1) == episode_seed(5, 1)


# ===================== RUNNER =====================
def test_zero_steps_touches_nothing():
    env = linear_env()
    t = run_episodes(env, RandomPolicy(), 0, seed=1)
    assert len(t) == 0
    assert t.episodes == 0
    assert env.state is None


def test_runner_resets_finished_episodes():
    t = run_episodes(linear_env(episode_length_max=10), RandomPolicy(seed=2), 35, seed=3)
    assert len(t) == 35
    assert t.episodes == 4
    assert [s.done for s in t.steps].count(True) == 3


def test_runner_feeds_rewards_back_to_the_policy():
    policy = EpsilonGreedyPolicy(epsilon=0.1, seed=4)
    t = run_episodes(linear_env(), policy, 200, seed=5)
    assert sum(policy.counts.values()) == 200
    assert len(t.rewards) == 200


def test_negative_steps():
    with pytest.raises(ValueError):
        run_episodes(linear_env(), RandomPolicy(), -1, seed=0)


def test_run_report_fields():
    env = linear_env()
    policy = RandomPolicy(seed=6)
    t = run_episodes(env, policy, 50, seed=6)
    report = build_run_report("f" * 64, policy, t, env.diagnostics())
    assert report.policy == "random"
    assert report.steps == 50
    assert report.cumulative_reward == t.cumulative_reward
    assert report.fingerprint == t.fingerprint()
    assert report.footprint["observed"] == 50
    assert report.assumption_footprint == 0.0


# ===================== ARTIFACTS =====================
def test_trajectory_csv(tmp_path):
    path = write_trajectory_csv(transcript_of([1.0, 0.25]), str(tmp_path / "out" / "trajectory.csv"))
    with open(path, encoding="utf-8") as f:
        text = f.read()
    assert text.splitlines()[0] == "step,reward,user,action"
    assert "\r" not in text
    frame = pd.read_csv(path)
    assert frame["reward"].tolist() == [1.0, 0.25]
    assert frame["action"].tolist() == ["a|b", "a|b"]


def test_empty_trajectory_csv_is_header_only():
    assert trajectory_frame(transcript_of([])).to_csv(index=False, lineterminator="\n") == "step,reward,user,action\n"


def test_canonical_json_report(tmp_path):
    path = write_canonical_json({"z": 1, "a": 0.5}, str(tmp_path / "report.json"))
    with open(path, encoding="utf-8") as f:
        assert f.read() == '{"a":0.5,"z":1}'


def test_reward_curve_svg_is_deterministic():
    t = transcript_of([0.0, 1.0, 0.5, 0.5])
    first, second = reward_curve_svg(t), reward_curve_svg(t)
    assert first == second
    assert first.lstrip().startswith("<?xml")
    assert "<svg" in first


def test_estimates_csv_columns():
    text = estimates_csv([{"estimator": "ips", "value": 1.0, "standard_error": 0.5, "n": 2, "matched_count": "", "clip": "", "flags": ""}])
    assert text.splitlines()[0] == "estimator,value,standard_error,n,matched_count,clip,flags"


def test_format_table_rounds_floats():
    table = format_table({"density": 0.123456, "event_count": 5})
    assert "0.1235" in table
    assert "event_count" in table
