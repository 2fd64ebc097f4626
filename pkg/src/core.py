"""
Environment interface and the composition law.

An Environment is exactly the composition of a Simulator, a Reward
Function and a State Feature Representation: for every step, with
x = simulator.transition(action), the reward is reward_fn.apply(x) and
the next state is state_repr.apply(x). Nothing else couples the parts.
"""

from dataclasses import dataclass, field, replace
from typing import Dict, FrozenSet, Iterable, Optional, Protocol, Sequence, Tuple, Union, runtime_checkable

import numpy as np

from data_engine.interactions import Scalar
from utils.errors import (
    EpisodeFinished,
    EpisodeNotStarted,
    InvalidAction,
    InvalidBounds,
    SchemaMismatch,
)
from utils.logger import get_logger
from utils.prng import check_seed

logger = get_logger(__name__)

FEEDBACK_SOURCES = ("observed", "imputed", "default", "missing")


# ===================== DOMAIN TYPES =====================
@dataclass(frozen=True)
class Action:
    slate: Tuple[str, ...]

    def __post_init__(self):
        object.__setattr__(self, "slate", tuple(self.slate))

    @classmethod
    def single(cls, item: str) -> "Action":
        return cls(slate=(item,))

    def __len__(self) -> int:
        return len(self.slate)

    def validate(self, candidates: Iterable[str], k: Optional[int] = None):
        if not self.slate:
            raise InvalidAction("slate must contain at least one item")
        if k is not None and len(self.slate) != k:
            raise InvalidAction(f"slate has {len(self.slate)} items, environment expects {k}")
        if len(set(self.slate)) != len(self.slate):
            raise InvalidAction(f"slate contains duplicate items: {list(self.slate)}")
        allowed = set(candidates)
        outside = [item for item in self.slate if item not in allowed]
        if outside:
            raise InvalidAction(f"items not in the candidate set: {outside}")


@dataclass(frozen=True)
class RawOutcome:
    step_index: int
    user: str
    action_taken: Optional[Action]
    feedback: Tuple[Optional[float], ...]
    context: Dict[str, Scalar]
    terminal: bool
    candidates: Tuple[str, ...] = ()
    feedback_source: Tuple[str, ...] = ()


@dataclass(frozen=True)
class State:
    features: Tuple[float, ...]
    user: str
    candidates: Tuple[str, ...]
    clock: int

    @property
    def vector(self) -> np.ndarray:
        return np.asarray(self.features, dtype=np.float64)

    def to_record(self) -> dict:
        return {
            "features": list(self.features),
            "user": self.user,
            "candidates": list(self.candidates),
            "clock": self.clock,
        }


@dataclass(frozen=True)
class StepResult:
    reward: float
    next_state: State
    done: bool
    raw: RawOutcome


@dataclass
class EnvironmentDiagnostics:
    steps: int = 0
    episodes: int = 0
    clamped_rewards: int = 0
    clamped_features: int = 0
    slot_sources: Dict[str, int] = field(default_factory=lambda: {s: 0 for s in FEEDBACK_SOURCES})

    @property
    def assumption_footprint(self) -> float:
        """Share of emitted feedback slots that came from Design Assumptions."""
        total = sum(self.slot_sources.values())
        if not total:
            return 0.0
        return (self.slot_sources["imputed"] + self.slot_sources["default"]) / total


# ===================== COMPONENT PROTOCOLS =====================
@runtime_checkable
class Simulator(Protocol):
    emitted_context_keys: FrozenSet[str]

    def reset(self, seed: int) -> RawOutcome:
        ...

    def transition(self, action: Action) -> RawOutcome:
        ...

    def clone(self) -> "Simulator":
        ...


# ===================== ENVIRONMENT =====================
class Environment:

    def __init__(self, simulator, reward_fn, state_repr, bounds: Sequence[float], slate_k: int = 1):
        self.simulator = simulator
        self.reward_fn = reward_fn
        self.state_repr = state_repr
        self.bounds = (float(bounds[0]), float(bounds[1]))
        self.slate_k = slate_k

        self._state: Optional[State] = None
        self._done = False
        self._diagnostics = EnvironmentDiagnostics()

    @property
    def state(self) -> Optional[State]:
        return self._state

    @property
    def done(self) -> bool:
        return self._done

    def reset(self, seed: int) -> State:
        check_seed(seed)
        x = self.simulator.reset(seed)
        state, clamps = self.state_repr.apply_with_diagnostics(x)
        self._state = state
        self._done = x.terminal
        self._diagnostics.episodes += 1
        self._diagnostics.clamped_features += clamps
        return state

    def step(self, action: Union[Action, Sequence[str]]) -> StepResult:
        if self._state is None:
            raise EpisodeNotStarted()
        if self._done:
            raise EpisodeFinished()
        if not isinstance(action, Action):
            action = Action(slate=tuple(action))
        candidates = self._state.candidates
        # a shrunken candidate set lowers the slate length it can support
        action.validate(candidates, min(self.slate_k, len(candidates)) or None)

        x = self.simulator.transition(action)
        reward, reward_clamped = self.reward_fn.apply_with_diagnostics(x)
        next_state, feature_clamps = self.state_repr.apply_with_diagnostics(x)

        r_min, r_max = self.bounds
        if not r_min <= reward <= r_max:
            # unreachable when compose_environment accepted the parts
            raise InvalidBounds(f"reward {reward} escaped bounds [{r_min}, {r_max}]")

        d = self._diagnostics
        d.steps += 1
        d.clamped_rewards += int(reward_clamped)
        d.clamped_features += feature_clamps
        for source in x.feedback_source:
            d.slot_sources[source] = d.slot_sources.get(source, 0) + 1

        self._state = next_state
        self._done = x.terminal
        return StepResult(reward=reward, next_state=next_state, done=x.terminal, raw=x)

    def diagnostics(self) -> EnvironmentDiagnostics:
        d = self._diagnostics
        return replace(d, slot_sources=dict(d.slot_sources))

    def clone(self) -> "Environment":
        """Fresh replica; shares only the immutable reward function and state pipeline."""
        return Environment(
            simulator=self.simulator.clone(),
            reward_fn=self.reward_fn,
            state_repr=self.state_repr,
            bounds=self.bounds,
            slate_k=self.slate_k,
        )


def compose_environment(sim, rf, sr, bounds: Sequence[float], slate_k: int = 1) -> Environment:
    if len(bounds) != 2:
        raise InvalidBounds(f"bounds must be [r_min, r_max], got {list(bounds)}")
    r_min, r_max = float(bounds[0]), float(bounds[1])
    if not r_min < r_max:
        raise InvalidBounds(f"bounds must satisfy r_min < r_max, got [{r_min}, {r_max}]")

    rf_min, rf_max = rf.bounds
    if rf_min < r_min or rf_max > r_max:
        raise InvalidBounds(
            f"reward function range [{rf_min}, {rf_max}] exceeds environment bounds [{r_min}, {r_max}]"
        )

    missing = set(sr.required_context_keys) - set(sim.emitted_context_keys)
    if missing:
        raise SchemaMismatch(missing)

    if slate_k < 1:
        raise InvalidAction(f"slate_k must be at least 1, got {slate_k}")

    logger.info(
        f"Composed environment: state dim {sr.dimension}, slate_k {slate_k}, bounds [{r_min}, {r_max}]"
    )
    return Environment(sim, rf, sr, (r_min, r_max), slate_k)
