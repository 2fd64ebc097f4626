from src.core import (
    Action,
    RawOutcome,
    State,
    StepResult,
    Environment,
    EnvironmentDiagnostics,
    Simulator,
    compose_environment
)
from src.simulator import (
    SequentialReplay,
    EmpiricalFrequency,
    UniformRandom,
    LookupSkip,
    LookupDefault,
    ImputeMAR,
    DesignAssumptions,
    FeedbackStatistics,
    DatasetSimulator,
    build_simulator
)
from src.reward import (
    Rating,
    BinaryClick,
    SlateSum,
    SlateDCG,
    Revenue,
    RewardSpec,
    RewardFunction,
    make_reward_fn
)
from src.state_repr import (
    UserIdOneHot,
    UserProfileMean,
    ContextKey,
    ClockScaled,
    Normalize,
    StatePipelineSpec,
    FrozenStatePipeline,
    StateRepresentation,
    build_state_repr
)
from src.offpolicy import (
    LoggedDecision,
    ValueEstimate,
    OverlapReport,
    ConstantRewardModel,
    TabularRewardModel,
    RidgeRewardModel,
    fit_ridge_model,
    logged_decisions_from_log,
    replay_evaluate,
    ips_estimate,
    snips_estimate,
    direct_method,
    doubly_robust,
    overlap_report
)
from src.agents import (
    Policy,
    RandomPolicy,
    ConstantPolicy,
    EpsilonGreedyPolicy,
    LinUCBPolicy,
    create_policy,
    parse_params
)
from src.orchastrate import (
    Transcript,
    RunReport,
    run_episodes,
    fingerprint_transcript,
    canonical_json
)
from src.manifest import (
    EnvironmentManifest,
    create_manifest,
    save_manifest,
    load_manifest,
    manifest_hash,
    build_environment,
    fingerprint_trajectory
)

__all__ = [
    # Core
    "Action",
    "RawOutcome",
    "State",
    "StepResult",
    "Environment",
    "EnvironmentDiagnostics",
    "Simulator",
    "compose_environment",
    # Simulator
    "SequentialReplay",
    "EmpiricalFrequency",
    "UniformRandom",
    "LookupSkip",
    "LookupDefault",
    "ImputeMAR",
    "DesignAssumptions",
    "FeedbackStatistics",
    "DatasetSimulator",
    "build_simulator",
    # Reward
    "Rating",
    "BinaryClick",
    "SlateSum",
    "SlateDCG",
    "Revenue",
    "RewardSpec",
    "RewardFunction",
    "make_reward_fn",
    # State
    "UserIdOneHot",
    "UserProfileMean",
    "ContextKey",
    "ClockScaled",
    "Normalize",
    "StatePipelineSpec",
    "FrozenStatePipeline",
    "StateRepresentation",
    "build_state_repr",
    # Off-policy
    "LoggedDecision",
    "ValueEstimate",
    "OverlapReport",
    "ConstantRewardModel",
    "TabularRewardModel",
    "RidgeRewardModel",
    "fit_ridge_model",
    "logged_decisions_from_log",
    "replay_evaluate",
    "ips_estimate",
    "snips_estimate",
    "direct_method",
    "doubly_robust",
    "overlap_report",
    # Agents
    "Policy",
    "RandomPolicy",
    "ConstantPolicy",
    "EpsilonGreedyPolicy",
    "LinUCBPolicy",
    "create_policy",
    "parse_params",
    # Orchestration
    "Transcript",
    "RunReport",
    "run_episodes",
    "fingerprint_transcript",
    "canonical_json",
    # Manifest
    "EnvironmentManifest",
    "create_manifest",
    "save_manifest",
    "load_manifest",
    "manifest_hash",
    "build_environment",
    "fingerprint_trajectory"
]
