"""
State Feature Representation: a deterministic, serializable feature pipeline
from RawOutcome to the State the agent sees.

Fit-based stages (one-hot user index, per-user profile means, min-max
normalization) freeze their statistics at build time. The frozen form is
what the manifest stores, so reproducing an environment never refits.
"""

import math
from typing import Annotated, Dict, FrozenSet, List, Literal, Sequence, Tuple, Union

from pydantic import BaseModel, ConfigDict, Field, model_validator

from data_engine.interactions import InteractionLog, Scalar
from src.core import RawOutcome, State
from utils.errors import EmptyLog, EmptyPipeline
from utils.logger import get_logger

logger = get_logger(__name__)


class _Tagged(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid", allow_inf_nan=False)


# ===================== STAGE SPECS =====================
class UserIdOneHot(_Tagged):
    kind: Literal["user_id_one_hot"] = "user_id_one_hot"


class UserProfileMean(_Tagged):
    kind: Literal["user_profile_mean"] = "user_profile_mean"


class ContextKey(_Tagged):
    kind: Literal["context_key"] = "context_key"
    name: str
    missing_default: float


class ClockScaled(_Tagged):
    kind: Literal["clock_scaled"] = "clock_scaled"
    denominator: float = Field(gt=0)


InnerStage = Annotated[
    Union[UserIdOneHot, UserProfileMean, ContextKey, ClockScaled],
    Field(discriminator="kind"),
]


class Normalize(_Tagged):
    kind: Literal["normalize"] = "normalize"
    inner: InnerStage


FeatureStage = Annotated[
    Union[UserIdOneHot, UserProfileMean, ContextKey, ClockScaled, Normalize],
    Field(discriminator="kind"),
]


class StatePipelineSpec(_Tagged):
    stages: List[FeatureStage]


# ===================== FROZEN STATISTICS =====================
class OneHotStats(_Tagged):
    kind: Literal["user_id_one_hot"] = "user_id_one_hot"
    users: List[str]


class ProfileMeanStats(_Tagged):
    kind: Literal["user_profile_mean"] = "user_profile_mean"
    means: Dict[str, float]


class ContextKeyStats(_Tagged):
    kind: Literal["context_key"] = "context_key"


class ClockScaledStats(_Tagged):
    kind: Literal["clock_scaled"] = "clock_scaled"


InnerStats = Annotated[
    Union[OneHotStats, ProfileMeanStats, ContextKeyStats, ClockScaledStats],
    Field(discriminator="kind"),
]


class NormalizeStats(_Tagged):
    kind: Literal["normalize"] = "normalize"
    inner: InnerStats
    minimums: List[float]
    maximums: List[float]


StageStats = Annotated[
    Union[OneHotStats, ProfileMeanStats, ContextKeyStats, ClockScaledStats, NormalizeStats],
    Field(discriminator="kind"),
]


class FrozenStatePipeline(_Tagged):
    spec: StatePipelineSpec
    stats: List[StageStats]

    @model_validator(mode="after")
    def _aligned(self):
        if len(self.spec.stages) != len(self.stats):
            raise ValueError("stats must have one entry per stage")
        for stage, stats in zip(self.spec.stages, self.stats):
            if stage.kind != stats.kind:
                raise ValueError(f"stats kind {stats.kind!r} does not match stage kind {stage.kind!r}")
            if isinstance(stage, Normalize) and stage.inner.kind != stats.inner.kind:
                raise ValueError("normalize stats do not match the wrapped stage")
        return self


# ===================== COMPILED STAGES =====================
def _as_real(value: Scalar, default: float) -> float:
    if isinstance(value, bool):
        return 1.0 if value else 0.0
    if isinstance(value, (int, float)):
        value = float(value)
        return value if math.isfinite(value) else default
    try:
        value = float(value)
    except (TypeError, ValueError):
        return default
    return value if math.isfinite(value) else default


class _OneHot:
    def __init__(self, stats: OneHotStats):
        self._stats = stats
        self._index = {u: i for i, u in enumerate(stats.users)}
        self.dimension = len(stats.users)
        self.required_context_keys: FrozenSet[str] = frozenset()

    def values(self, user, context, clock) -> List[float]:
        out = [0.0] * self.dimension
        # unseen users keep the all-zeros block
        index = self._index.get(user)
        if index is not None:
            out[index] = 1.0
        return out

    def stats(self):
        return self._stats


class _ProfileMean:
    def __init__(self, stats: ProfileMeanStats):
        self._stats = stats
        self.dimension = 1
        self.required_context_keys: FrozenSet[str] = frozenset()

    def values(self, user, context, clock) -> List[float]:
        return [self._stats.means.get(user, 0.0)]

    def stats(self):
        return self._stats


class _ContextKey:
    def __init__(self, stage: ContextKey):
        self._stage = stage
        self.dimension = 1
        self.required_context_keys: FrozenSet[str] = frozenset([stage.name])

    def values(self, user, context, clock) -> List[float]:
        if self._stage.name not in context:
            return [self._stage.missing_default]
        return [_as_real(context[self._stage.name], self._stage.missing_default)]

    def stats(self):
        return ContextKeyStats()


class _ClockScaled:
    def __init__(self, stage: ClockScaled):
        self._stage = stage
        self.dimension = 1
        self.required_context_keys: FrozenSet[str] = frozenset()

    def values(self, user, context, clock) -> List[float]:
        return [clock / self._stage.denominator]

    def stats(self):
        return ClockScaledStats()


class _Normalize:
    def __init__(self, inner, minimums: Sequence[float], maximums: Sequence[float]):
        self._inner = inner
        self._minimums = list(minimums)
        self._maximums = list(maximums)
        self.dimension = inner.dimension
        self.required_context_keys = inner.required_context_keys

    def values_with_clamps(self, user, context, clock) -> Tuple[List[float], int]:
        out = []
        clamps = 0
        for v, lo, hi in zip(self._inner.values(user, context, clock), self._minimums, self._maximums):
            if hi <= lo:
                out.append(0.0)
                continue
            t = (v - lo) / (hi - lo)
            if t < 0.0:
                t, clamps = 0.0, clamps + 1
            elif t > 1.0:
                t, clamps = 1.0, clamps + 1
            out.append(t)
        return out, clamps

    def values(self, user, context, clock) -> List[float]:
        return self.values_with_clamps(user, context, clock)[0]

    def stats(self):
        return NormalizeStats(inner=self._inner.stats(), minimums=self._minimums, maximums=self._maximums)


def _fit_inner(stage, log: InteractionLog):
    if isinstance(stage, UserIdOneHot):
        return _OneHot(OneHotStats(users=list(log.sorted_users())))
    if isinstance(stage, UserProfileMean):
        totals: Dict[str, float] = {}
        counts: Dict[str, int] = {}
        for e in log.events:
            totals[e.user] = totals.get(e.user, 0.0) + e.feedback
            counts[e.user] = counts.get(e.user, 0) + 1
        return _ProfileMean(ProfileMeanStats(means={u: totals[u] / counts[u] for u in sorted(totals)}))
    if isinstance(stage, ContextKey):
        return _ContextKey(stage)
    return _ClockScaled(stage)


def _fit_stage(stage, log: InteractionLog):
    if isinstance(stage, (UserIdOneHot, UserProfileMean, Normalize)) and not log.events:
        raise EmptyLog()
    if not isinstance(stage, Normalize):
        return _fit_inner(stage, log)

    inner = _fit_inner(stage.inner, log)
    minimums = [math.inf] * inner.dimension
    maximums = [-math.inf] * inner.dimension
    # the event's position in the log plays the clock
    for clock, e in enumerate(log.events):
        for d, v in enumerate(inner.values(e.user, e.context, clock)):
            minimums[d] = min(minimums[d], v)
            maximums[d] = max(maximums[d], v)
    return _Normalize(inner, minimums, maximums)


def _restore_inner(stage, stats):
    if isinstance(stage, UserIdOneHot):
        return _OneHot(stats)
    if isinstance(stage, UserProfileMean):
        return _ProfileMean(stats)
    if isinstance(stage, ContextKey):
        return _ContextKey(stage)
    return _ClockScaled(stage)


def _restore_stage(stage, stats):
    if isinstance(stage, Normalize):
        return _Normalize(_restore_inner(stage.inner, stats.inner), stats.minimums, stats.maximums)
    return _restore_inner(stage, stats)


# ===================== STATE REPRESENTATION =====================
class StateRepresentation:

    def __init__(self, spec: StatePipelineSpec, compiled: list):
        self.spec = spec
        self._compiled = compiled
        self.dimension = sum(stage.dimension for stage in compiled)
        self.required_context_keys: FrozenSet[str] = frozenset().union(
            *(stage.required_context_keys for stage in compiled)
        )

    @classmethod
    def from_frozen(cls, frozen: FrozenStatePipeline) -> "StateRepresentation":
        if not frozen.spec.stages:
            raise EmptyPipeline()
        compiled = [_restore_stage(stage, stats) for stage, stats in zip(frozen.spec.stages, frozen.stats)]
        return cls(frozen.spec, compiled)

    def frozen(self) -> FrozenStatePipeline:
        return FrozenStatePipeline(spec=self.spec, stats=[stage.stats() for stage in self._compiled])

    def features(self, user: str, context, clock: int) -> Tuple[Tuple[float, ...], int]:
        out: List[float] = []
        clamps = 0
        for stage in self._compiled:
            if isinstance(stage, _Normalize):
                values, n = stage.values_with_clamps(user, context, clock)
                clamps += n
            else:
                values = stage.values(user, context, clock)
            out.extend(values)
        return tuple(out), clamps

    def apply_with_diagnostics(self, x: RawOutcome) -> Tuple[State, int]:
        features, clamps = self.features(x.user, x.context, x.step_index)
        state = State(features=features, user=x.user, candidates=tuple(x.candidates), clock=x.step_index)
        return state, clamps

    def apply(self, x: RawOutcome) -> State:
        return self.apply_with_diagnostics(x)[0]

    def __call__(self, x: RawOutcome) -> State:
        return self.apply(x)


def build_state_repr(spec: StatePipelineSpec, log: InteractionLog) -> StateRepresentation:
    if not spec.stages:
        raise EmptyPipeline()
    sr = StateRepresentation(spec, [_fit_stage(stage, log) for stage in spec.stages])
    if sr.dimension < 1:
        raise EmptyPipeline()
    logger.info(f"Built state representation: {len(spec.stages)} stages, dimension {sr.dimension}")
    return sr
