import hashlib
import json
import os

import pytest

from data_engine.loader import load_interaction_log
from helpers import write_csv
from src.agents import ConstantPolicy, RandomPolicy
from src.core import compose_environment
from src.manifest import (
    build_environment,
    create_manifest,
    fingerprint_trajectory,
    load_manifest,
    manifest_bytes,
    manifest_hash,
    parse_manifest,
    save_manifest,
)
from src.orchastrate import run_episodes
from src.reward import BinaryClick, Rating, Revenue, RewardSpec, SlateDCG, SlateSum, make_reward_fn
from src.simulator import (
    DesignAssumptions,
    EmpiricalFrequency,
    ImputeMAR,
    LookupDefault,
    LookupSkip,
    SequentialReplay,
    UniformRandom,
    build_simulator,
)
from src.state_repr import (
    ClockScaled,
    ContextKey,
    Normalize,
    StatePipelineSpec,
    UserIdOneHot,
    UserProfileMean,
    build_state_repr,
)
from utils.errors import HashMismatch, SchemaError, VersionUnsupported

RATING = RewardSpec(kind=Rating(), missing_policy="treat_as_min", bounds=(0.0, 1.0), normalize=True)
STATE = StatePipelineSpec(stages=[UserIdOneHot(), ContextKey(name="hour", missing_default=0.0)])


def assumptions(arrival=None, feedback=None, candidate_policy="all_items", episode_length_max=40):
    return DesignAssumptions(
        arrival=arrival or SequentialReplay(),
        feedback=feedback or ImputeMAR(level="user"),
        candidate_policy=candidate_policy,
        episode_length_max=episode_length_max,
    )


def manifest(csv, seed=7, **kwargs):
    return create_manifest(csv, assumptions(**kwargs), RATING, STATE, seed)


def fingerprint(m, policy=None, steps=100):
    return fingerprint_trajectory(m, policy or RandomPolicy(seed=1), steps)


# ===================== SAVE / LOAD =====================
def test_save_load_round_trip(tmp_path, ratings_csv):
    m = manifest(ratings_csv)
    path = save_manifest(m, str(tmp_path / "env.rsenv.json"))
    loaded = load_manifest(path)
    assert loaded == m
    assert manifest_bytes(loaded) == (tmp_path / "env.rsenv.json").read_bytes()
    assert manifest_hash(loaded) == manifest_hash(m)


def test_bytes_are_canonical(ratings_csv):
    text = manifest_bytes(manifest(ratings_csv)).decode("utf-8")
    document = json.loads(text)
    assert text == json.dumps(document, sort_keys=True, separators=(",", ":"), ensure_ascii=False)
    assert document["prng"] == "xoshiro256**"
    assert document["format_version"] == 1


def test_different_seeds_give_different_hashes(ratings_csv):
    a, b = manifest(ratings_csv, seed=1), manifest(ratings_csv, seed=2)
    assert manifest_bytes(a) != manifest_bytes(b)
    assert manifest_hash(a) != manifest_hash(b)


def test_tampered_dataset(tmp_path, ratings_csv):
    path = save_manifest(manifest(ratings_csv), str(tmp_path / "env.rsenv.json"))
    with open(ratings_csv, "a", encoding="utf-8") as f:
        f.write("u9,i9,3,99,3\n")
    with pytest.raises(HashMismatch):
        load_manifest(path)
    # skipping verification still parses
    assert load_manifest(path, verify=False).seed == 7


def test_relative_dataset_path_resolves_against_manifest(tmp_path, ratings_csv):
    out_dir = tmp_path / "envs"
    m = create_manifest(ratings_csv, assumptions(), RATING, STATE, 3, manifest_dir=str(out_dir))
    assert not os.path.isabs(m.dataset.path)
    path = save_manifest(m, str(out_dir / "env.rsenv.json"))
    assert load_manifest(path) == m
    env = build_environment(m, str(out_dir))
    assert env.reset(0).user == "u0"


def test_unsupported_version(ratings_csv):
    document = manifest(ratings_csv).to_document()
    document["format_version"] = 2
    with pytest.raises(VersionUnsupported):
        parse_manifest(document)


def test_missing_required_field_names_its_path(ratings_csv):
    document = manifest(ratings_csv).to_document()
    del document["slate_k"]
    with pytest.raises(SchemaError) as info:
        parse_manifest(document)
    assert info.value.path == "slate_k"


def test_missing_defaulted_field_still_rejected(ratings_csv):
    document = manifest(ratings_csv).to_document()
    del document["dataset"]["columns"]["propensity"]
    with pytest.raises(SchemaError) as info:
        parse_manifest(document)
    assert info.value.path == "dataset.columns.propensity"


def test_unknown_assumption_tag_rejected(ratings_csv):
    document = manifest(ratings_csv).to_document()
    document["assumptions"]["arrival"] = {"kind": "poisson"}
    with pytest.raises(SchemaError) as info:
        parse_manifest(document)
    assert info.value.path.startswith("assumptions.arrival")


def test_bounds_must_match_reward_bounds(ratings_csv):
    document = manifest(ratings_csv).to_document()
    document["bounds"] = [0.0, 2.0]
    with pytest.raises(SchemaError):
        parse_manifest(document)


def test_not_json(tmp_path):
    path = tmp_path / "bad.rsenv.json"
    path.write_bytes(b"{not json")
    with pytest.raises(SchemaError):
        load_manifest(str(path))


@pytest.mark.parametrize("value", [float("nan"), float("inf"), float("-inf")])
def test_non_finite_default_rejected(ratings_csv, value):
    document = manifest(ratings_csv, feedback=LookupDefault(value=0.0)).to_document()
    document["assumptions"]["feedback"]["value"] = value
    with pytest.raises(SchemaError) as info:
        parse_manifest(document)
    assert info.value.path.startswith("assumptions.feedback")


def test_nan_token_in_file_rejected(tmp_path, ratings_csv):
    document = manifest(ratings_csv, feedback=LookupDefault(value=0.0)).to_document()
    document["assumptions"]["feedback"]["value"] = float("nan")
    path = tmp_path / "nan.rsenv.json"
    path.write_text(json.dumps(document))
    assert "NaN" in path.read_text()
    with pytest.raises(SchemaError) as info:
        load_manifest(str(path))
    assert "NaN" in str(info.value)


# ===================== BUILD =====================
def test_builds_reproduce_transcripts(ratings_csv):
    m = manifest(ratings_csv, arrival=UniformRandom())
    assert fingerprint(m) == fingerprint(m)


def test_build_matches_manual_composition(ratings_csv):
    a = assumptions(arrival=EmpiricalFrequency())
    m = create_manifest(ratings_csv, a, RATING, STATE, 7)
    log = load_interaction_log(ratings_csv)
    manual = compose_environment(
        build_simulator(log, a),
        make_reward_fn(RATING, log.feedback_range),
        build_state_repr(STATE, log),
        RATING.bounds,
    )
    expected = run_episodes(manual, RandomPolicy(seed=1), 100, 7).fingerprint()
    assert fingerprint(m) == expected


def test_empty_transcript_fingerprint(ratings_csv):
    expected = hashlib.sha256(b'{"format_version":1,"transcript":[]}').hexdigest()
    assert fingerprint(manifest(ratings_csv), steps=0) == expected


def test_arrival_tag_changes_the_trajectory(tmp_path):
    csv = write_csv(
        tmp_path / "skewed.csv",
        ["user_id", "item_id", "feedback", "timestamp"],
        [("A", "x", 1, 1), ("A", "y", 2, 2), ("A", "z", 3, 3), ("B", "x", 4, 4)],
    )
    a = create_manifest(csv, assumptions(arrival=EmpiricalFrequency()), RATING, StatePipelineSpec(stages=[UserIdOneHot()]), 7)
    b = create_manifest(csv, assumptions(arrival=UniformRandom()), RATING, StatePipelineSpec(stages=[UserIdOneHot()]), 7)
    assert fingerprint(a) != fingerprint(b)


@pytest.mark.parametrize("changed", [
    {"arrival": UniformRandom()},
    {"feedback": LookupDefault(value=0.0)},
    {"candidate_policy": "exclude_consumed"},
])
def test_flipping_one_assumption_changes_the_fingerprint(ratings_csv, changed):
    # u2 arrives on step two and never rated i1
    policy = lambda: ConstantPolicy("i1")
    base = fingerprint(manifest(ratings_csv), policy())
    assert fingerprint(manifest(ratings_csv, **changed), policy()) != base


# ===================== RANDOMIZED MANIFESTS =====================
ARRIVALS = [SequentialReplay(), EmpiricalFrequency(), UniformRandom()]
FEEDBACKS = [LookupSkip(), LookupDefault(value=0.0), LookupDefault(value=2.5), ImputeMAR(level="global"), ImputeMAR(level="user"), ImputeMAR(level="item")]
REWARDS = [
    RATING,
    RewardSpec(kind=BinaryClick(threshold=3.0), missing_policy="treat_as_zero", bounds=(0.0, 1.0), normalize=False),
    RewardSpec(kind=SlateSum(), missing_policy="treat_as_min", bounds=(-1.0, 1.0), normalize=True),
    RewardSpec(kind=SlateDCG(), missing_policy="treat_as_zero", bounds=(0.0, 5.0), normalize=True),
    RewardSpec(kind=Revenue(prices={"i0": 2.0, "i3": 5.5}, threshold=4.0), missing_policy="treat_as_zero", bounds=(0.0, 7.5), normalize=False),
]
STATES = [
    STATE,
    StatePipelineSpec(stages=[UserProfileMean()]),
    StatePipelineSpec(stages=[Normalize(inner=UserProfileMean()), Normalize(inner=ClockScaled(denominator=10.0))]),
    StatePipelineSpec(stages=[Normalize(inner=ContextKey(name="hour", missing_default=0.0)), UserIdOneHot()]),
]


def randomized_manifests(csv, count):
    for i in range(count):
        yield create_manifest(
            csv,
            assumptions(
                arrival=ARRIVALS[i % 3],
                feedback=FEEDBACKS[(i // 3) % 6],
                candidate_policy=("all_items", "exclude_consumed")[(i // 2) % 2],
                episode_length_max=1 + (i * 37) % 200,
            ),
            REWARDS[i % 5],
            STATES[(i // 5) % 4],
            seed=(i * 0x9E3779B97F4A7C15) % 2**64,
            slate_k=1 + i % 3,
        )


def test_randomized_manifests_round_trip_byte_for_byte(tmp_path, ratings_csv):
    for i, m in enumerate(randomized_manifests(ratings_csv, 100)):
        path = save_manifest(m, str(tmp_path / f"m{i}.rsenv.json"))
        assert manifest_bytes(load_manifest(path)) == (tmp_path / f"m{i}.rsenv.json").read_bytes()


def _rewards_in_bounds(csv, n_manifests, steps):
    for i, m in enumerate(randomized_manifests(csv, n_manifests)):
        env = build_environment(m)
        transcript = run_episodes(env, RandomPolicy(seed=i, slate_k=m.slate_k), steps, m.seed)
        low, high = m.bounds
        assert all(low <= r <= high for r in transcript.rewards)


def test_rewards_stay_within_manifest_bounds(ratings_csv):
    _rewards_in_bounds(ratings_csv, 20, 500)


@pytest.mark.slow
def test_rewards_stay_within_manifest_bounds_full_scale(ratings_csv):
    _rewards_in_bounds(ratings_csv, 20, 5_000)
