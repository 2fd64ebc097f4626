import math
from typing import Annotated, Dict, List, Literal, Optional, Sequence, Tuple, Union

from pydantic import BaseModel, ConfigDict, Field

from src.core import RawOutcome
from utils.errors import InvalidSpec
from utils.logger import get_logger

logger = get_logger(__name__)


# ===================== REWARD SPEC =====================
class _Tagged(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid", allow_inf_nan=False)


class Rating(_Tagged):
    kind: Literal["rating"] = "rating"


class BinaryClick(_Tagged):
    kind: Literal["binary_click"] = "binary_click"
    threshold: float


class SlateSum(_Tagged):
    kind: Literal["slate_sum"] = "slate_sum"


class SlateDCG(_Tagged):
    kind: Literal["slate_dcg"] = "slate_dcg"


class Revenue(_Tagged):
    kind: Literal["revenue"] = "revenue"
    prices: Dict[str, float]
    # a slot is a purchase when its feedback reaches this value
    threshold: float


RewardKind = Annotated[
    Union[Rating, BinaryClick, SlateSum, SlateDCG, Revenue],
    Field(discriminator="kind"),
]


class RewardSpec(_Tagged):
    kind: RewardKind
    missing_policy: Literal["treat_as_zero", "treat_as_min"]
    bounds: Tuple[float, float]
    normalize: bool


def dcg_discounts(k: int) -> List[float]:
    return [1.0 / math.log2(j + 1) for j in range(1, k + 1)]


# ===================== REWARD FUNCTION =====================
class RewardFunction:
    """Pure mapping from a RawOutcome to a bounded reward."""

    def __init__(self, spec: RewardSpec, feedback_range: Sequence[float], slate_k: int, natural_range: Tuple[float, float]):
        self.spec = spec
        self.feedback_range = (float(feedback_range[0]), float(feedback_range[1]))
        self.slate_k = slate_k
        self.natural_range = natural_range
        self.bounds = (float(spec.bounds[0]), float(spec.bounds[1]))

    def _resolve(self, feedback: Sequence[Optional[float]]) -> List[float]:
        fill = 0.0 if self.spec.missing_policy == "treat_as_zero" else self.feedback_range[0]
        values = [fill if v is None else float(v) for v in feedback]
        return values or [fill]

    def raw_value(self, x: RawOutcome) -> float:
        """Kind value before normalization and clamping."""
        values = self._resolve(x.feedback)
        kind = self.spec.kind

        if isinstance(kind, Rating):
            return values[0]
        if isinstance(kind, BinaryClick):
            return 1.0 if values[0] >= kind.threshold else 0.0
        if isinstance(kind, SlateSum):
            total = 0.0
            for v in values:
                total += v
            return total
        if isinstance(kind, SlateDCG):
            total = 0.0
            for v, discount in zip(values, dcg_discounts(len(values))):
                total += v * discount
            return total

        # Revenue
        slate = x.action_taken.slate if x.action_taken is not None else ()
        total = 0.0
        for item, v in zip(slate, values):
            if v >= kind.threshold:
                total += kind.prices.get(item, 0.0)
        return total

    def apply_with_diagnostics(self, x: RawOutcome) -> Tuple[float, bool]:
        value = self.raw_value(x)
        r_min, r_max = self.bounds
        if self.spec.normalize:
            lo, hi = self.natural_range
            t = (value - lo) / (hi - lo)
            # this form hits both endpoints exactly
            value = r_min * (1.0 - t) + r_max * t
        if value < r_min:
            return r_min, True
        if value > r_max:
            return r_max, True
        return value, False

    def apply(self, x: RawOutcome) -> float:
        return self.apply_with_diagnostics(x)[0]

    def __call__(self, x: RawOutcome) -> float:
        return self.apply(x)


def natural_range(kind, feedback_range: Sequence[float], slate_k: int) -> Tuple[float, float]:
    f_min, f_max = feedback_range
    if isinstance(kind, Rating):
        return f_min, f_max
    if isinstance(kind, BinaryClick):
        return 0.0, 1.0
    if isinstance(kind, SlateSum):
        return slate_k * f_min, slate_k * f_max
    if isinstance(kind, SlateDCG):
        total = sum(dcg_discounts(slate_k))
        return f_min * total, f_max * total
    top = sorted(kind.prices.values(), reverse=True)[:slate_k]
    return 0.0, float(sum(top))


def make_reward_fn(spec: RewardSpec, feedback_range: Sequence[float], slate_k: int = 1) -> RewardFunction:
    r_min, r_max = spec.bounds
    if not r_min < r_max:
        raise InvalidSpec(f"bounds must satisfy r_min < r_max, got [{r_min}, {r_max}]")
    if not all(math.isfinite(b) for b in spec.bounds):
        raise InvalidSpec("bounds must be finite")
    if slate_k < 1:
        raise InvalidSpec(f"slate_k must be at least 1, got {slate_k}")

    f_min, f_max = feedback_range
    if not (math.isfinite(f_min) and math.isfinite(f_max)) or f_min > f_max:
        raise InvalidSpec(f"feedback range must be ordered, got [{f_min}, {f_max}]")

    kind = spec.kind
    if isinstance(kind, BinaryClick) and not f_min <= kind.threshold <= f_max:
        raise InvalidSpec(f"binary_click threshold {kind.threshold} outside feedback range [{f_min}, {f_max}]")
    if isinstance(kind, Revenue):
        if not math.isfinite(kind.threshold) or not all(math.isfinite(p) for p in kind.prices.values()):
            raise InvalidSpec("revenue prices and threshold must be finite")
        if any(p < 0 for p in kind.prices.values()):
            raise InvalidSpec("revenue prices must be non-negative")

    lo, hi = natural_range(kind, (f_min, f_max), slate_k)
    if spec.normalize and not lo < hi:
        raise InvalidSpec(f"{kind.kind} natural range [{lo}, {hi}] is degenerate; cannot normalize")

    logger.info(f"Reward function: {kind.kind}, natural range [{lo}, {hi}], bounds [{r_min}, {r_max}]")
    return RewardFunction(spec, (f_min, f_max), slate_k, (lo, hi))
