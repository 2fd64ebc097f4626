from typing import Dict, Optional, Sequence

from data_engine.interactions import InteractionEvent, InteractionLog
from src.core import Action, RawOutcome
from src.simulator import DesignAssumptions, LookupSkip, SequentialReplay

FIXTURE_HEADER = ["user_id", "item_id", "feedback", "timestamp", "hour"]


def fixture_rows():
    rows = []
    for t in range(50):
        rows.append((f"u{t % 5}", f"i{(3 * t + t // 5) % 10}", 1 + (7 * t) % 5, t, t % 24))
    return rows


def write_csv(path, header: Sequence[str], rows) -> str:
    lines = [",".join(header)] + [",".join(str(cell) for cell in row) for row in rows]
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    return str(path)


def event(user: str, item: str, feedback: float, timestamp: int, propensity: Optional[float] = None, **context):
    return InteractionEvent(user, item, float(feedback), timestamp, propensity, context)


def make_log(rows, feedback_range=None) -> InteractionLog:
    """rows of (user, item, feedback, timestamp)"""
    return InteractionLog.from_events([event(*row) for row in rows], feedback_range)


def outcome(
    user: str = "u0",
    feedback=(),
    context: Optional[Dict] = None,
    step: int = 0,
    slate: Sequence[str] = (),
    candidates: Sequence[str] = (),
    terminal: bool = False,
) -> RawOutcome:
    return RawOutcome(
        step_index=step,
        user=user,
        action_taken=Action(slate=tuple(slate)) if slate else None,
        feedback=tuple(feedback),
        context=dict(context or {}),
        terminal=terminal,
        candidates=tuple(candidates),
    )


def assumptions(arrival=None, feedback=None, candidate_policy="all_items", episode_length_max=1000) -> DesignAssumptions:
    return DesignAssumptions(
        arrival=arrival or SequentialReplay(),
        feedback=feedback or LookupSkip(),
        candidate_policy=candidate_policy,
        episode_length_max=episode_length_max,
    )
