from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
from scipy.linalg import cho_factor, cho_solve

from src.core import Action, State
from utils.errors import DimensionMismatch, EmptyCandidates, UnknownPolicy
from utils.logger import get_logger
from utils.prng import Xoshiro256

logger = get_logger(__name__)


def _top_k(candidates: Sequence[str], scores: Sequence[float], k: int) -> Tuple[str, ...]:
    # highest score first, ties broken by item id
    ranked = sorted(zip(candidates, scores), key=lambda pair: (-pair[1], pair[0]))
    return tuple(item for item, _ in ranked[:k])


# ===================== POLICY BASE =====================
class Policy:
    """An Agent: picks slates from State.candidates and learns from rewards through update()."""

    name = "policy"
    # False when act() may return different slates for the same state
    deterministic = True

    def __init__(self, seed: int = 0, slate_k: int = 1):
        if slate_k < 1:
            raise ValueError(f"slate_k must be at least 1, got {slate_k}")
        self.seed = seed
        self.slate_k = slate_k
        self.rng = Xoshiro256.derive(seed, f"policy:{self.name}")

    def _slate_size(self, state: State) -> int:
        if not state.candidates:
            raise EmptyCandidates()
        return min(self.slate_k, len(state.candidates))

    def act(self, state: State) -> Action:
        raise NotImplementedError

    def update(self, state: State, action: Action, reward: float) -> None:
        return None

    def params(self) -> Dict[str, object]:
        return {}


# ===================== RANDOM =====================
class RandomPolicy(Policy):
    name = "random"
    deterministic = False

    def act(self, state: State) -> Action:
        k = self._slate_size(state)
        return Action(slate=tuple(self.rng.sample(state.candidates, k)))


# ===================== CONSTANT =====================
class ConstantPolicy(Policy):
    """Always recommends one item; falls back to the smallest candidate id when it is unavailable."""

    name = "constant"

    def __init__(self, item: str, seed: int = 0, slate_k: int = 1):
        super().__init__(seed, slate_k)
        self.item = str(item)

    def act(self, state: State) -> Action:
        k = self._slate_size(state)
        ordered = sorted(state.candidates)
        if self.item in state.candidates:
            ordered.remove(self.item)
            ordered.insert(0, self.item)
        return Action(slate=tuple(ordered[:k]))

    def params(self) -> Dict[str, object]:
        return {"item": self.item}


# ===================== EPSILON-GREEDY =====================
class EpsilonGreedyPolicy(Policy):
    name = "epsilon_greedy"

    def __init__(self, epsilon: float = 0.1, seed: int = 0, slate_k: int = 1):
        if not 0.0 <= epsilon <= 1.0:
            raise ValueError(f"epsilon must be in [0, 1], got {epsilon}")
        super().__init__(seed, slate_k)
        self.epsilon = float(epsilon)
        self.values: Dict[str, float] = {}
        self.counts: Dict[str, int] = {}

    @property
    def deterministic(self) -> bool:
        return self.epsilon == 0.0

    def act(self, state: State) -> Action:
        k = self._slate_size(state)
        # one uniform draw decides exploration on every call
        if self.rng.random() < self.epsilon:
            return Action(slate=tuple(self.rng.sample(state.candidates, k)))
        scores = [self.values.get(item, 0.0) for item in state.candidates]
        return Action(slate=_top_k(state.candidates, scores, k))

    def update(self, state: State, action: Action, reward: float) -> None:
        for item in action.slate:
            n = self.counts.get(item, 0) + 1
            mean = self.values.get(item, 0.0)
            self.counts[item] = n
            self.values[item] = mean + (reward - mean) / n

    def params(self) -> Dict[str, object]:
        return {"epsilon": self.epsilon}


# ===================== LINUCB =====================
class LinUCBPolicy(Policy):
    """
    Disjoint linear UCB: one ridge model per item.

    score(i) = x.theta_i + alpha * sqrt(x' A_i^-1 x), theta_i = A_i^-1 b_i.
    A_i starts at the identity and b_i at zeros; the feature dimension is
    fixed by the first state seen unless given up front.
    """

    name = "linucb"

    def __init__(self, alpha: float = 1.0, seed: int = 0, slate_k: int = 1, dimension: Optional[int] = None):
        if alpha < 0:
            raise ValueError(f"alpha must be non-negative, got {alpha}")
        super().__init__(seed, slate_k)
        self.alpha = float(alpha)
        self.dimension = int(dimension) if dimension is not None else None
        self.A: Dict[str, np.ndarray] = {}
        self.b: Dict[str, np.ndarray] = {}
        self._A_inv: Dict[str, np.ndarray] = {}

    def _context(self, state: State) -> np.ndarray:
        x = state.vector
        if self.dimension is None:
            self.dimension = len(x)
        if len(x) != self.dimension:
            raise DimensionMismatch(self.dimension, len(x))
        return x

    def _ensure(self, item: str):
        if item not in self.A:
            d = self.dimension
            self.A[item] = np.eye(d)
            self.b[item] = np.zeros(d)
            self._A_inv[item] = np.eye(d)

    def theta(self, item: str) -> np.ndarray:
        self._ensure(item)
        return self._A_inv[item] @ self.b[item]

    def scores(self, state: State) -> np.ndarray:
        x = self._context(state)
        for item in state.candidates:
            self._ensure(item)
        A_inv = np.stack([self._A_inv[item] for item in state.candidates])
        b = np.stack([self.b[item] for item in state.candidates])
        theta = np.einsum("nij,nj->ni", A_inv, b)
        width = np.einsum("i,nij,j->n", x, A_inv, x)
        return theta @ x + self.alpha * np.sqrt(np.maximum(width, 0.0))

    def act(self, state: State) -> Action:
        k = self._slate_size(state)
        return Action(slate=_top_k(state.candidates, self.scores(state).tolist(), k))

    def update(self, state: State, action: Action, reward: float) -> None:
        x = self._context(state)
        for item in action.slate:
            self._ensure(item)
            self.A[item] = self.A[item] + np.outer(x, x)
            self.b[item] = self.b[item] + reward * x
            # fresh Cholesky factorization; fails loudly if A_i lost positive definiteness
            factor = cho_factor(self.A[item])
            self._A_inv[item] = cho_solve(factor, np.eye(self.dimension))

    def params(self) -> Dict[str, object]:
        return {"alpha": self.alpha}


# ===================== REGISTRY =====================
POLICIES = {
    RandomPolicy.name: RandomPolicy,
    ConstantPolicy.name: ConstantPolicy,
    EpsilonGreedyPolicy.name: EpsilonGreedyPolicy,
    LinUCBPolicy.name: LinUCBPolicy,
}


def _parse_value(text: str):
    for cast in (int, float):
        try:
            return cast(text)
        except ValueError:
            continue
    return text


def parse_params(text: Optional[str], keep_text: Sequence[str] = ("item",)) -> Dict[str, object]:
    """Parses 'k=v,k2=v2'; numeric values become int or float except for keys in keep_text."""
    params: Dict[str, object] = {}
    if not text:
        return params
    for pair in text.split(","):
        pair = pair.strip()
        if not pair:
            continue
        key, sep, value = pair.partition("=")
        if not sep or not key.strip():
            raise ValueError(f"expected key=value, got {pair!r}")
        key, value = key.strip(), value.strip()
        params[key] = value if key in keep_text else _parse_value(value)
    return params


def create_policy(name: str, params: Optional[Dict[str, object]] = None, seed: int = 0, slate_k: int = 1) -> Policy:
    policy_cls = POLICIES.get(name)
    if policy_cls is None:
        raise UnknownPolicy(name, POLICIES)
    params = dict(params or {})
    try:
        policy = policy_cls(seed=seed, slate_k=slate_k, **params)
    except TypeError as e:
        raise ValueError(f"invalid parameters for policy {name!r}: {e}") from e
    logger.info(f"Created policy {name} with params {policy.params()} (seed {seed})")
    return policy


def known_policies() -> List[str]:
    return sorted(POLICIES)
