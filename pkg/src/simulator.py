import copy
from typing import Annotated, Dict, FrozenSet, List, Literal, Optional, Tuple, Union

from pydantic import BaseModel, ConfigDict, Field

from data_engine.interactions import InteractionEvent, InteractionLog
from data_engine.matrix import observed_feedback
from src.core import Action, RawOutcome
from utils.errors import EmptyLog, EpisodeFinished, EpisodeNotStarted
from utils.logger import get_logger
from utils.prng import Xoshiro256

logger = get_logger(__name__)


# ===================== DESIGN ASSUMPTIONS =====================
class _Tagged(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid", allow_inf_nan=False)


class SequentialReplay(_Tagged):
    kind: Literal["sequential_replay"] = "sequential_replay"


class EmpiricalFrequency(_Tagged):
    kind: Literal["empirical_frequency"] = "empirical_frequency"


class UniformRandom(_Tagged):
    kind: Literal["uniform_random"] = "uniform_random"


ArrivalModel = Annotated[
    Union[SequentialReplay, EmpiricalFrequency, UniformRandom],
    Field(discriminator="kind"),
]


class LookupSkip(_Tagged):
    kind: Literal["lookup_skip"] = "lookup_skip"


class LookupDefault(_Tagged):
    kind: Literal["lookup_default"] = "lookup_default"
    value: float


class ImputeMAR(_Tagged):
    kind: Literal["impute_mar"] = "impute_mar"
    level: Literal["global", "user", "item"]


FeedbackModel = Annotated[
    Union[LookupSkip, LookupDefault, ImputeMAR],
    Field(discriminator="kind"),
]

CandidatePolicy = Literal["all_items", "exclude_consumed"]


class DesignAssumptions(_Tagged):
    """The explicit ledger of modeling choices that turns Observed Data into a runnable world."""
    arrival: ArrivalModel
    feedback: FeedbackModel
    candidate_policy: CandidatePolicy
    episode_length_max: int = Field(ge=1)


class FeedbackStatistics(_Tagged):
    """Means frozen at build time for missing-at-random imputation."""
    global_mean: float
    user_means: Dict[str, float]
    item_means: Dict[str, float]

    @classmethod
    def from_log(cls, log: InteractionLog) -> "FeedbackStatistics":
        def means(key) -> Dict[str, float]:
            totals: Dict[str, float] = {}
            counts: Dict[str, int] = {}
            for e in log.events:
                k = key(e)
                totals[k] = totals.get(k, 0.0) + e.feedback
                counts[k] = counts.get(k, 0) + 1
            return {k: totals[k] / counts[k] for k in sorted(totals)}

        values = [e.feedback for e in log.events]
        return cls(
            global_mean=sum(values) / len(values) if values else 0.0,
            user_means=means(lambda e: e.user),
            item_means=means(lambda e: e.item),
        )


# ===================== DATASET SIMULATOR =====================
class DatasetSimulator:
    """Replays Observed Data under an explicit set of Design Assumptions."""

    ARRIVAL_STREAM = "simulator.arrival"

    def __init__(
        self,
        log: InteractionLog,
        assumptions: DesignAssumptions,
        stats: Optional[FeedbackStatistics] = None,
    ):
        if not log.events:
            raise EmptyLog()
        self.log = log
        self.assumptions = assumptions
        self.stats = stats or FeedbackStatistics.from_log(log)
        self.emitted_context_keys: FrozenSet[str] = log.context_keys

        self._observed = observed_feedback(log, "last")
        self._catalog = log.sorted_items()
        self._users = log.sorted_users()

        consumed: Dict[str, set] = {}
        user_events: Dict[str, List[int]] = {}
        for index, e in enumerate(log.events):
            consumed.setdefault(e.user, set()).add(e.item)
            user_events.setdefault(e.user, []).append(index)
        self._log_consumed = {u: frozenset(items) for u, items in consumed.items()}
        self._user_events = {u: tuple(idx) for u, idx in user_events.items()}

        self._reset_episode_fields()

    def _reset_episode_fields(self):
        self._arrival: Optional[Xoshiro256] = None
        self._step = 0
        self._cursor = 0
        self._current: Optional[InteractionEvent] = None
        self._candidates: Tuple[str, ...] = ()
        self._episode_consumed: Dict[str, set] = {}
        self._done = False

    # --------------------- candidates ---------------------
    def candidates_for(self, user: str) -> Tuple[str, ...]:
        if self.assumptions.candidate_policy == "all_items":
            return self._catalog
        excluded = self._log_consumed.get(user, frozenset()) | self._episode_consumed.get(user, set())
        return tuple(item for item in self._catalog if item not in excluded)

    def _eligible(self, user: str) -> bool:
        if self.assumptions.candidate_policy == "all_items":
            return True
        return bool(self.candidates_for(user))

    # --------------------- arrivals ---------------------
    def _next_arrival(self, advance: bool) -> Optional[InteractionEvent]:
        arrival = self.assumptions.arrival
        events = self.log.events

        if isinstance(arrival, SequentialReplay):
            cursor = self._cursor + 1 if advance else self._cursor
            while cursor < len(events) and not self._eligible(events[cursor].user):
                cursor += 1
            self._cursor = cursor
            return events[cursor] if cursor < len(events) else None

        eligible_users = [u for u in self._users if self._eligible(u)]
        if not eligible_users:
            return None

        if isinstance(arrival, EmpiricalFrequency):
            if len(eligible_users) == len(self._users):
                return events[self._arrival.below(len(events))]
            pool = [i for u in eligible_users for i in self._user_events[u]]
            return events[pool[self._arrival.below(len(pool))]]

        # UniformRandom
        user = self._arrival.choice(eligible_users)
        return events[self._arrival.choice(self._user_events[user])]

    # --------------------- feedback ---------------------
    def _lookup(self, user: str, item: str) -> Tuple[Optional[float], str]:
        value = self._observed.get((user, item))
        if value is not None:
            return value, "observed"

        model = self.assumptions.feedback
        if isinstance(model, LookupSkip):
            return None, "missing"
        if isinstance(model, LookupDefault):
            return model.value, "default"

        stats = self.stats
        if model.level == "user":
            return stats.user_means.get(user, stats.global_mean), "imputed"
        if model.level == "item":
            return stats.item_means.get(item, stats.global_mean), "imputed"
        return stats.global_mean, "imputed"

    # --------------------- lifecycle ---------------------
    def reset(self, seed: int) -> RawOutcome:
        self._reset_episode_fields()
        self._arrival = Xoshiro256.derive(seed, self.ARRIVAL_STREAM)

        current = self._next_arrival(advance=False)
        if current is None:
            # every user is exhausted before the first step
            self._done = True
            return RawOutcome(
                step_index=0,
                user=self.log.events[0].user,
                action_taken=None,
                feedback=(),
                context=dict(self.log.events[0].context),
                terminal=True,
            )

        self._current = current
        self._candidates = self.candidates_for(current.user)
        return RawOutcome(
            step_index=0,
            user=current.user,
            action_taken=None,
            feedback=(),
            context=dict(current.context),
            terminal=False,
            candidates=self._candidates,
        )

    def transition(self, action: Action) -> RawOutcome:
        if self._arrival is None:
            raise EpisodeNotStarted()
        if self._done:
            raise EpisodeFinished()
        action.validate(self._candidates)

        user = self._current.user
        looked_up = [self._lookup(user, item) for item in action.slate]
        self._episode_consumed.setdefault(user, set()).update(action.slate)
        self._step += 1

        upcoming = None
        if self._step < self.assumptions.episode_length_max:
            upcoming = self._next_arrival(advance=True)

        feedback = tuple(value for value, _ in looked_up)
        sources = tuple(source for _, source in looked_up)

        if upcoming is None:
            self._done = True
            self._candidates = ()
            return RawOutcome(
                step_index=self._step,
                user=user,
                action_taken=action,
                feedback=feedback,
                context=dict(self._current.context),
                terminal=True,
                feedback_source=sources,
            )

        self._current = upcoming
        self._candidates = self.candidates_for(upcoming.user)
        return RawOutcome(
            step_index=self._step,
            user=upcoming.user,
            action_taken=action,
            feedback=feedback,
            context=dict(upcoming.context),
            terminal=False,
            candidates=self._candidates,
            feedback_source=sources,
        )

    def clone(self) -> "DatasetSimulator":
        replica = copy.copy(self)
        replica._reset_episode_fields()
        return replica


def build_simulator(
    log: InteractionLog,
    assumptions: DesignAssumptions,
    stats: Optional[FeedbackStatistics] = None,
) -> DatasetSimulator:
    sim = DatasetSimulator(log, assumptions, stats)
    logger.info(
        f"Built simulator: {assumptions.arrival.kind} arrivals, {assumptions.feedback.kind} feedback, "
        f"{assumptions.candidate_policy}, episode_length_max={assumptions.episode_length_max}"
    )
    return sim
