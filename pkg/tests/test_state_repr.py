import pytest

from data_engine.interactions import InteractionLog
from helpers import event, make_log, outcome
from src.state_repr import (
    ClockScaled,
    ContextKey,
    FrozenStatePipeline,
    Normalize,
    StatePipelineSpec,
    StateRepresentation,
    UserIdOneHot,
    UserProfileMean,
    build_state_repr,
)
from utils.errors import EmptyLog, EmptyPipeline

HOURS = InteractionLog.from_events([event(f"u{h % 3}", "i", h % 5, h, hour=h) for h in range(11)])


def pipeline(*stages, log=None):
    return build_state_repr(StatePipelineSpec(stages=list(stages)), HOURS if log is None else log)


def test_one_hot_uses_sorted_users():
    sr = pipeline(UserIdOneHot(), log=make_log([("b", "x", 1, 1), ("a", "x", 1, 2)]))
    assert sr.dimension == 2
    assert sr(outcome(user="a")).features == (1.0, 0.0)
    assert sr(outcome(user="b")).features == (0.0, 1.0)


def test_unseen_user_gets_zero_block():
    sr = pipeline(UserIdOneHot(), log=make_log([("b", "x", 1, 1), ("a", "x", 1, 2)]))
    assert sr(outcome(user="zed")).features == (0.0, 0.0)


def test_profile_mean():
    sr = pipeline(UserProfileMean(), log=make_log([("u", "x", 2, 1), ("u", "y", 4, 2)]))
    assert sr(outcome(user="u")).features == (3.0,)
    assert sr(outcome(user="stranger")).features == (0.0,)


def test_dimension_adds_up():
    sr = pipeline(UserIdOneHot(), ContextKey(name="hour", missing_default=0.0), log=make_log([("a", "x", 1, 1), ("b", "x", 1, 2)]))
    assert sr.dimension == 3
    assert sr.required_context_keys == frozenset({"hour"})


def test_context_key_default_and_coercion():
    sr = pipeline(ContextKey(name="hour", missing_default=-1.0))
    assert sr(outcome(context={})).features == (-1.0,)
    assert sr(outcome(context={"hour": 4})).features == (4.0,)
    assert sr(outcome(context={"hour": "2.5"})).features == (2.5,)
    assert sr(outcome(context={"hour": True})).features == (1.0,)
    assert sr(outcome(context={"hour": "night"})).features == (-1.0,)


def test_clock_scaled():
    sr = pipeline(ClockScaled(denominator=4.0))
    assert sr(outcome(step=2)).features == (0.5,)


def test_clock_scaled_needs_positive_denominator():
    with pytest.raises(ValueError):
        ClockScaled(denominator=0.0)


def test_state_echoes_user_candidates_and_clock():
    sr = pipeline(ClockScaled(denominator=1.0))
    state = sr(outcome(user="u1", step=7, candidates=("a", "b")))
    assert state.user == "u1"
    assert state.clock == 7
    assert state.candidates == ("a", "b")


def test_apply_is_deterministic():
    sr = pipeline(UserIdOneHot(), UserProfileMean(), ContextKey(name="hour", missing_default=0.0))
    x = outcome(user="u1", context={"hour": 3})
    assert sr(x) == sr(x)


# ===================== NORMALIZE =====================
def test_normalize_maps_training_events_into_unit_interval():
    sr = pipeline(Normalize(inner=ContextKey(name="hour", missing_default=0.0)))
    for e in HOURS.events:
        (value,), clamps = sr.features(e.user, e.context, 0)
        assert 0.0 <= value <= 1.0
        assert clamps == 0


def test_normalize_clamps_and_counts_out_of_range():
    sr = pipeline(Normalize(inner=ContextKey(name="hour", missing_default=0.0)))
    state, clamps = sr.apply_with_diagnostics(outcome(context={"hour": 20}))
    assert state.features == (1.0,)
    assert clamps == 1
    state, clamps = sr.apply_with_diagnostics(outcome(context={"hour": -3}))
    assert state.features == (0.0,)
    assert clamps == 1


def test_normalize_constant_dimension_is_zero():
    log = make_log([("a", "x", 3, 1), ("b", "x", 3, 2)])
    sr = pipeline(Normalize(inner=UserProfileMean()), log=log)
    assert sr(outcome(user="a")).features == (0.0,)


def test_normalized_clock_uses_log_positions():
    sr = pipeline(Normalize(inner=ClockScaled(denominator=1.0)))
    assert sr(outcome(step=5)).features == (0.5,)


# ===================== ERRORS =====================
def test_empty_pipeline():
    with pytest.raises(EmptyPipeline):
        pipeline()


@pytest.mark.parametrize("stage", [UserIdOneHot(), UserProfileMean(), Normalize(inner=ClockScaled(denominator=1.0))])
def test_fit_stage_needs_events(stage):
    with pytest.raises(EmptyLog):
        pipeline(stage, log=InteractionLog.from_events([]))


def test_context_only_pipeline_builds_without_events():
    sr = pipeline(ContextKey(name="x0", missing_default=0.0), log=InteractionLog.from_events([]))
    assert sr.dimension == 1


# ===================== FROZEN FORM =====================
def test_frozen_round_trip_reproduces_features():
    sr = pipeline(
        UserIdOneHot(),
        Normalize(inner=UserProfileMean()),
        ContextKey(name="hour", missing_default=0.0),
        Normalize(inner=ClockScaled(denominator=2.0)),
    )
    frozen = FrozenStatePipeline.model_validate_json(sr.frozen().model_dump_json())
    restored = StateRepresentation.from_frozen(frozen)
    assert restored.dimension == sr.dimension
    for e in HOURS.events:
        x = outcome(user=e.user, context=e.context, step=e.timestamp)
        assert restored(x) == sr(x)


def test_frozen_stats_must_align_with_stages():
    frozen = pipeline(UserIdOneHot()).frozen().model_dump()
    frozen["spec"]["stages"] = [{"kind": "user_profile_mean"}]
    with pytest.raises(ValueError):
        FrozenStatePipeline.model_validate(frozen)
