"""
Counterfactual value estimators over logged bandit feedback.

Target policies are treated as deterministic: a logged decision counts as a
match when the target policy's action equals the logged action. A policy
that declares itself non-deterministic is sampled once per distinct context
and its estimates carry the "stochastic_target_frozen" flag.

Every estimator reports the naive i.i.d. standard error (sample std of the
per-event terms / sqrt(n)).
"""

import math
from dataclasses import dataclass
from typing import Dict, List, Optional, Protocol, Sequence, Tuple, runtime_checkable

import numpy as np
from pydantic import BaseModel
from sklearn.linear_model import Ridge

from data_engine.interactions import InteractionLog
from src.core import Action, State
from utils.errors import MissingPropensity, NoData, NoMatches
from utils.logger import get_logger

logger = get_logger(__name__)

ESTIMATORS = ("replay", "ips", "snips", "dm", "dr")


# ===================== LOGGED DATA =====================
@dataclass(frozen=True)
class LoggedDecision:
    context: State
    action: Action
    reward: float
    propensity: Optional[float] = None

    def __post_init__(self):
        if self.propensity is not None and not 0.0 < self.propensity <= 1.0:
            raise ValueError(f"propensity must be in (0, 1], got {self.propensity}")


def _numeric(value, default: float = 0.0) -> float:
    if isinstance(value, bool):
        return 1.0 if value else 0.0
    try:
        value = float(value)
    except (TypeError, ValueError):
        return default
    return value if math.isfinite(value) else default


def logged_decisions_from_log(
    log: InteractionLog,
    context_keys: Sequence[str] = (),
    catalog: Sequence[str] = (),
) -> List[LoggedDecision]:
    """Observed Data as bandit feedback: one logged decision per event; candidates are the logged items plus `catalog`."""
    catalog = tuple(sorted(log.items | set(catalog)))
    decisions = []
    for clock, e in enumerate(log.events):
        features = tuple(_numeric(e.context[k]) if k in e.context else 0.0 for k in context_keys)
        decisions.append(
            LoggedDecision(
                context=State(features=features, user=e.user, candidates=catalog, clock=clock),
                action=Action.single(e.item),
                reward=e.feedback,
                propensity=e.propensity,
            )
        )
    return decisions


# ===================== ESTIMATES =====================
class ValueEstimate(BaseModel):
    estimator: str
    value: Optional[float]
    standard_error: Optional[float]
    n: int
    matched_count: Optional[int] = None
    clip: Optional[float] = None
    flags: List[str] = []

    @classmethod
    def infeasible(cls, estimator: str, n: int, clip: Optional[float] = None) -> "ValueEstimate":
        return cls(estimator=estimator, value=None, standard_error=None, n=n, matched_count=0, clip=clip, flags=["infeasible"])

    def to_row(self) -> Dict[str, object]:
        return {
            "estimator": self.estimator,
            "value": "" if self.value is None else self.value,
            "standard_error": "" if self.standard_error is None else self.standard_error,
            "n": self.n,
            "matched_count": "" if self.matched_count is None else self.matched_count,
            "clip": "" if self.clip is None else self.clip,
            "flags": "|".join(self.flags),
        }


class OverlapReport(BaseModel):
    n: int
    matched_count: int
    match_rate: float
    min_propensity_on_matches: Optional[float]
    infeasible: bool

    def to_row(self) -> Dict[str, object]:
        return {
            "estimator": "overlap",
            "value": self.match_rate,
            "standard_error": "",
            "n": self.n,
            "matched_count": self.matched_count,
            "clip": "",
            "flags": "infeasible" if self.infeasible else "",
        }


def _mean_and_se(terms: np.ndarray) -> Tuple[float, float]:
    value = float(np.mean(terms))
    if len(terms) < 2:
        return value, 0.0
    return value, float(np.std(terms, ddof=1) / math.sqrt(len(terms)))


# ===================== REWARD MODELS =====================
@runtime_checkable
class RewardModel(Protocol):
    tag: str

    def predict(self, context: State, action: Action) -> float:
        ...

    def predict_many(self, contexts: Sequence[State], actions: Sequence[Action]) -> np.ndarray:
        ...


class ConstantRewardModel:
    tag = "constant"

    def __init__(self, value: float):
        if not math.isfinite(value):
            raise ValueError("constant reward model needs a finite value")
        self.value = float(value)

    def predict(self, context: State, action: Action) -> float:
        return self.value

    def predict_many(self, contexts: Sequence[State], actions: Sequence[Action]) -> np.ndarray:
        return np.full(len(contexts), self.value)


class TabularRewardModel:
    """Exact q(context, action) keyed by (context user, first slate item)."""
    tag = "tabular"

    def __init__(self, table: Dict[Tuple[str, str], float], default: float = 0.0):
        self.table = dict(table)
        self.default = default

    def predict(self, context: State, action: Action) -> float:
        return self.table.get((context.user, action.slate[0]), self.default)

    def predict_many(self, contexts: Sequence[State], actions: Sequence[Action]) -> np.ndarray:
        return np.array([self.predict(c, a) for c, a in zip(contexts, actions)], dtype=np.float64)


class RidgeRewardModel:
    """Ridge regression on context features joined with a one-hot of the action."""
    tag = "ridge"

    def __init__(self, model: Ridge, actions: Sequence[str]):
        self.model = model
        self.actions = tuple(actions)
        self._index = {a: i for i, a in enumerate(self.actions)}

    def design_matrix(self, contexts: Sequence[State], actions: Sequence[Action]) -> np.ndarray:
        width = len(contexts[0].features) if len(contexts) else 0
        features = np.array([c.features for c in contexts], dtype=np.float64).reshape(len(contexts), width)
        one_hot = np.zeros((len(contexts), len(self.actions)))
        for row, action in enumerate(actions):
            # actions outside the fitted vocabulary keep a zero block
            index = self._index.get(action.slate[0])
            if index is not None:
                one_hot[row, index] = 1.0
        return np.hstack([features, one_hot])

    def predict_many(self, contexts: Sequence[State], actions: Sequence[Action]) -> np.ndarray:
        if not len(contexts):
            return np.zeros(0)
        values = self.model.predict(self.design_matrix(contexts, actions))
        if not np.all(np.isfinite(values)):
            raise ValueError("ridge reward model produced a non-finite prediction")
        return values

    def predict(self, context: State, action: Action) -> float:
        return float(self.predict_many([context], [action])[0])


def fit_ridge_model(log: Sequence[LoggedDecision], alpha: float = 1.0) -> RidgeRewardModel:
    if not log:
        raise NoData()
    vocabulary: set = set()
    for d in log:
        vocabulary.add(d.action.slate[0])
        vocabulary.update(d.context.candidates)

    fitted = RidgeRewardModel(Ridge(alpha=alpha, fit_intercept=False), sorted(vocabulary))
    X = fitted.design_matrix([d.context for d in log], [d.action for d in log])
    fitted.model.fit(X, _rewards(log))
    logger.info(f"Fitted ridge reward model on {len(log)} decisions, {X.shape[1]} features")
    return fitted


# ===================== TARGET POLICY =====================
def target_actions(log: Sequence[LoggedDecision], policy) -> List[Action]:
    """Evaluates the target policy once per distinct context."""
    act = policy.act if hasattr(policy, "act") else policy
    memo: Dict[tuple, Action] = {}
    out = []
    for d in log:
        key = (d.context.user, d.context.features, d.context.candidates)
        action = memo.get(key)
        if action is None:
            action = act(d.context)
            if not isinstance(action, Action):
                action = Action(slate=tuple(action))
            memo[key] = action
        out.append(action)
    return out


def _policy_flags(policy) -> List[str]:
    if getattr(policy, "deterministic", True):
        return []
    return ["stochastic_target_frozen"]


def _matches(log: Sequence[LoggedDecision], actions: Sequence[Action]) -> np.ndarray:
    return np.array([a.slate == d.action.slate for d, a in zip(log, actions)], dtype=bool)


def _propensities(log: Sequence[LoggedDecision]) -> np.ndarray:
    for index, d in enumerate(log):
        if d.propensity is None:
            raise MissingPropensity(index)
    return np.array([d.propensity for d in log], dtype=np.float64)


def _weights(log, actions, clip: Optional[float]) -> Tuple[np.ndarray, bool]:
    if clip is not None and clip <= 0:
        raise ValueError(f"clip must be positive, got {clip}")
    propensities = _propensities(log)
    weights = np.where(_matches(log, actions), 1.0 / propensities, 0.0)
    clipped = False
    if clip is not None:
        clipped = bool(np.any(weights > clip))
        weights = np.minimum(weights, clip)
    return weights, clipped


def _rewards(log: Sequence[LoggedDecision]) -> np.ndarray:
    return np.array([d.reward for d in log], dtype=np.float64)


# ===================== ESTIMATORS =====================
def replay_evaluate(log: Sequence[LoggedDecision], policy) -> ValueEstimate:
    """Rejection replay; unbiased when logging was uniform over the candidate set."""
    matched = _matches(log, target_actions(log, policy))
    count = int(matched.sum())
    if count == 0:
        raise NoMatches(len(log))
    value, se = _mean_and_se(_rewards(log)[matched])
    return ValueEstimate(
        estimator="replay", value=value, standard_error=se, n=len(log), matched_count=count,
        flags=["assumes_uniform_logging"] + _policy_flags(policy),
    )


def ips_estimate(log: Sequence[LoggedDecision], policy, clip: Optional[float] = None) -> ValueEstimate:
    if not log:
        raise NoData()
    weights, clipped = _weights(log, target_actions(log, policy), clip)
    value, se = _mean_and_se(weights * _rewards(log))
    flags = _policy_flags(policy)
    if clipped:
        flags.append("clipped")
    if not weights.any():
        flags.append("no_overlap")
    return ValueEstimate(estimator="ips", value=value, standard_error=se, n=len(log), clip=clip, flags=flags)


def snips_estimate(log: Sequence[LoggedDecision], policy) -> ValueEstimate:
    if not log:
        raise NoData()
    weights, _ = _weights(log, target_actions(log, policy), None)
    total = float(weights.sum())
    if total == 0.0:
        raise NoMatches(len(log))
    rewards = _rewards(log)
    value = float((weights * rewards).sum() / total)
    # delta-method terms around the ratio estimate
    terms = weights * (rewards - value) / (total / len(log))
    _, se = _mean_and_se(terms)
    return ValueEstimate(estimator="snips", value=value, standard_error=se, n=len(log), flags=_policy_flags(policy))


def direct_method(log: Sequence[LoggedDecision], model: RewardModel, policy) -> ValueEstimate:
    if not log:
        raise NoData()
    contexts = [d.context for d in log]
    terms = model.predict_many(contexts, target_actions(log, policy))
    value, se = _mean_and_se(terms)
    flags = [f"model:{model.tag}"] + _policy_flags(policy)
    return ValueEstimate(estimator="dm", value=value, standard_error=se, n=len(log), flags=flags)


def doubly_robust(
    log: Sequence[LoggedDecision],
    model: RewardModel,
    policy,
    clip: Optional[float] = None,
) -> ValueEstimate:
    if not log:
        raise NoData()
    actions = target_actions(log, policy)
    weights, clipped = _weights(log, actions, clip)
    contexts = [d.context for d in log]
    q_target = model.predict_many(contexts, actions)
    q_logged = model.predict_many(contexts, [d.action for d in log])
    terms = q_target + weights * (_rewards(log) - q_logged)
    value, se = _mean_and_se(terms)
    flags = [f"model:{model.tag}"] + _policy_flags(policy)
    if clipped:
        flags.append("clipped")
    return ValueEstimate(estimator="dr", value=value, standard_error=se, n=len(log), clip=clip, flags=flags)


def overlap_report(log: Sequence[LoggedDecision], policy) -> OverlapReport:
    matched = _matches(log, target_actions(log, policy))
    count = int(matched.sum())
    on_matches = [d.propensity for d, m in zip(log, matched) if m and d.propensity is not None]
    report = OverlapReport(
        n=len(log),
        matched_count=count,
        match_rate=count / len(log) if log else 0.0,
        min_propensity_on_matches=min(on_matches) if on_matches else None,
        infeasible=count == 0,
    )
    if report.infeasible:
        logger.warning(f"Target policy has no overlap with the {len(log)} logged actions")
    return report
