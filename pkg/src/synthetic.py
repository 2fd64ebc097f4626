"""
Synthetic worlds with known ground truth, used as oracles: a tabular
Bernoulli bandit for off-policy estimators and a linear-Bernoulli
simulator for agents.
"""

import copy
from typing import Dict, FrozenSet, List, Mapping, Optional, Sequence

import numpy as np

from data_engine.interactions import InteractionLog
from src.agents import Policy
from src.core import Action, Environment, RawOutcome, State, compose_environment
from src.offpolicy import LoggedDecision, TabularRewardModel
from src.reward import Rating, RewardSpec, make_reward_fn
from src.state_repr import ContextKey, StatePipelineSpec, build_state_repr
from utils.errors import EpisodeFinished, EpisodeNotStarted
from utils.logger import get_logger
from utils.prng import Xoshiro256

logger = get_logger(__name__)


def _ids(prefix: str, n: int) -> tuple:
    width = len(str(max(n - 1, 0)))
    return tuple(f"{prefix}{i:0{width}d}" for i in range(n))


# ===================== TABULAR BANDIT =====================
class LookupPolicy(Policy):
    """Deterministic target policy: a fixed action per context user."""

    name = "lookup"

    def __init__(self, mapping: Mapping[str, str], seed: int = 0):
        super().__init__(seed, 1)
        self.mapping = dict(mapping)

    def act(self, state: State) -> Action:
        self._slate_size(state)
        item = self.mapping.get(state.user)
        if item not in state.candidates:
            item = min(state.candidates)
        return Action.single(item)

    def params(self) -> Dict[str, object]:
        return {"mapping": dict(sorted(self.mapping.items()))}


class TabularBandit:
    """Contexts x actions table of Bernoulli click probabilities; contexts arrive uniformly."""

    def __init__(self, means: Sequence[Sequence[float]]):
        self.means = np.asarray(means, dtype=np.float64)
        if self.means.ndim != 2 or not self.means.size:
            raise ValueError("means must be a non-empty contexts x actions table")
        if np.any(self.means < 0) or np.any(self.means > 1):
            raise ValueError("means must be probabilities in [0, 1]")
        n_contexts, n_actions = self.means.shape
        self.contexts = _ids("c", n_contexts)
        self.actions = _ids("a", n_actions)
        self._action_index = {a: j for j, a in enumerate(self.actions)}
        eye = np.eye(n_contexts)
        self.states = tuple(
            State(features=tuple(eye[i].tolist()), user=c, candidates=self.actions, clock=0)
            for i, c in enumerate(self.contexts)
        )
        self._singletons = tuple(Action.single(a) for a in self.actions)

    @classmethod
    def random(cls, n_contexts: int, n_actions: int, seed: int) -> "TabularBandit":
        rng = np.random.default_rng(seed)
        return cls(rng.uniform(0.05, 0.95, size=(n_contexts, n_actions)))

    def true_value(self, policy) -> float:
        """Exact expectation of the policy's reward over uniform contexts."""
        act = policy.act if hasattr(policy, "act") else policy
        values = [
            self.means[i, self._action_index[act(state).slate[0]]]
            for i, state in enumerate(self.states)
        ]
        return float(np.mean(values))

    def optimal_policy(self) -> LookupPolicy:
        return LookupPolicy({c: self.actions[int(np.argmax(row))] for c, row in zip(self.contexts, self.means)})

    def exact_model(self) -> TabularRewardModel:
        return TabularRewardModel({
            (c, a): float(self.means[i, j])
            for i, c in enumerate(self.contexts)
            for j, a in enumerate(self.actions)
        })

    def sample_log(self, n: int, seed: int, logging: Optional[Sequence[Sequence[float]]] = None) -> List[LoggedDecision]:
        """n logged decisions; logging defaults to uniform over actions."""
        rng = np.random.default_rng(seed)
        n_contexts, n_actions = self.means.shape
        contexts = rng.integers(n_contexts, size=n)

        if logging is None:
            actions = rng.integers(n_actions, size=n)
            propensities = np.full(n, 1.0 / n_actions)
        else:
            probs = np.asarray(logging, dtype=np.float64)
            cumulative = np.cumsum(probs, axis=1)
            u = rng.random(n)
            actions = np.minimum((u[:, None] >= cumulative[contexts]).sum(axis=1), n_actions - 1)
            propensities = probs[contexts, actions]

        rewards = (rng.random(n) < self.means[contexts, actions]).astype(np.float64)
        return [
            LoggedDecision(self.states[c], self._singletons[a], float(r), float(p))
            for c, a, r, p in zip(contexts.tolist(), actions.tolist(), rewards.tolist(), propensities.tolist())
        ]


# ===================== LINEAR BANDIT SIMULATOR =====================
class LinearBanditSimulator:
    """
    Users arrive uniformly with a context vector x drawn from [0, 1]^d; an
    item i clicks with probability clip(x . theta_i, 0, 1).
    """

    STREAM = "synthetic.linear"

    def __init__(self, weights: Mapping[str, Sequence[float]], n_users: int = 10, episode_length_max: int = 1000):
        if not weights:
            raise ValueError("weights must name at least one item")
        self.items = tuple(sorted(weights))
        self.theta = np.array([weights[i] for i in self.items], dtype=np.float64)
        self.dimension = self.theta.shape[1]
        self.users = _ids("u", n_users)
        self.episode_length_max = episode_length_max
        self.context_keys = tuple(f"x{j}" for j in range(self.dimension))
        self.emitted_context_keys: FrozenSet[str] = frozenset(self.context_keys)
        self.feedback_range = (0.0, 1.0)
        self._rng: Optional[Xoshiro256] = None
        self._step = 0
        self._done = False
        self._user = ""
        self._x = np.zeros(self.dimension)

    def click_probability(self, item: str, x: Sequence[float]) -> float:
        p = float(np.dot(self.theta[self.items.index(item)], x))
        return min(max(p, 0.0), 1.0)

    def _arrive(self):
        self._user = self.users[self._rng.below(len(self.users))]
        self._x = np.array([self._rng.random() for _ in range(self.dimension)])

    def _context(self) -> Dict[str, float]:
        return {k: float(v) for k, v in zip(self.context_keys, self._x)}

    def reset(self, seed: int) -> RawOutcome:
        self._rng = Xoshiro256.derive(seed, self.STREAM)
        self._step = 0
        self._done = False
        self._arrive()
        return RawOutcome(
            step_index=0, user=self._user, action_taken=None, feedback=(),
            context=self._context(), terminal=False, candidates=self.items,
        )

    def transition(self, action: Action) -> RawOutcome:
        if self._rng is None:
            raise EpisodeNotStarted()
        if self._done:
            raise EpisodeFinished()
        action.validate(self.items)

        feedback = tuple(
            1.0 if self._rng.random() < self.click_probability(item, self._x) else 0.0
            for item in action.slate
        )
        self._step += 1
        user, context = self._user, self._context()
        self._done = self._step >= self.episode_length_max
        if not self._done:
            self._arrive()
            user, context = self._user, self._context()

        return RawOutcome(
            step_index=self._step,
            user=user,
            action_taken=action,
            feedback=feedback,
            context=context,
            terminal=self._done,
            candidates=() if self._done else self.items,
            feedback_source=("observed",) * len(feedback),
        )

    def clone(self) -> "LinearBanditSimulator":
        replica = copy.copy(self)
        replica._rng = None
        replica._done = False
        return replica


def single_best_item_weights(n_items: int = 5, dimension: int = 3, best: float = 0.3, other: float = 0.1) -> Dict[str, List[float]]:
    """Weights where item 0 dominates every other item at every context."""
    items = _ids("i", n_items)
    return {item: [best if k == 0 else other] * dimension for k, item in enumerate(items)}


def linear_bandit_environment(sim: LinearBanditSimulator, slate_k: int = 1) -> Environment:
    """Composes the simulator with click reward in [0, 1] and raw context features."""
    spec = StatePipelineSpec(stages=[ContextKey(name=k, missing_default=0.0) for k in sim.context_keys])
    sr = build_state_repr(spec, InteractionLog.from_events([]))
    reward = RewardSpec(kind=Rating(), missing_policy="treat_as_zero", bounds=(0.0, 1.0), normalize=False)
    rf = make_reward_fn(reward, sim.feedback_range, slate_k)
    return compose_environment(sim, rf, sr, (0.0, 1.0), slate_k)
