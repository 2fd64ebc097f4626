import io
import os
from typing import Dict, List, Optional, Sequence

import matplotlib

matplotlib.use("Agg")
from matplotlib.figure import Figure
import pandas as pd

from src.orchastrate import Transcript, canonical_json
from utils.config import settings
from utils.logger import get_logger

logger = get_logger(__name__)

TRAJECTORY_COLUMNS = ["step", "reward", "user", "action"]
ESTIMATE_COLUMNS = ["estimator", "value", "standard_error", "n", "matched_count", "clip", "flags"]

# fixed salt and no date keep SVG bytes identical across runs
SVG_RC = {"svg.hashsalt": "rsenv", "svg.fonttype": "none"}


def _write_text(path: str, text: str):
    directory = os.path.dirname(os.path.abspath(path))
    os.makedirs(directory, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="") as f:
        f.write(text)


# --- CSV artifacts ---
def trajectory_frame(transcript: Transcript) -> pd.DataFrame:
    rows = [
        {"step": s.step, "reward": s.reward, "user": s.state.user, "action": "|".join(s.action.slate)}
        for s in transcript.steps
    ]
    return pd.DataFrame(rows, columns=TRAJECTORY_COLUMNS)


def write_trajectory_csv(transcript: Transcript, path: str) -> str:
    try:
        text = trajectory_frame(transcript).to_csv(index=False, lineterminator="\n")
        _write_text(path, text)
        logger.info(f"Trajectory saved to: {path}")
        return path
    except OSError as e:
        logger.error(f"Error saving trajectory CSV: {e}")
        raise


def estimates_csv(rows: Sequence[Dict[str, object]]) -> str:
    return pd.DataFrame(list(rows), columns=ESTIMATE_COLUMNS).to_csv(index=False, lineterminator="\n")


def write_rows_csv(rows: Sequence[Dict[str, object]], columns: List[str], path: str) -> str:
    try:
        _write_text(path, pd.DataFrame(list(rows), columns=columns).to_csv(index=False, lineterminator="\n"))
        logger.info(f"Table saved to: {path}")
        return path
    except OSError as e:
        logger.error(f"Error saving CSV table: {e}")
        raise


# --- JSON artifacts ---
def write_canonical_json(document: dict, path: str) -> str:
    try:
        _write_text(path, canonical_json(document))
        logger.info(f"Report saved to: {path}")
        return path
    except OSError as e:
        logger.error(f"Error saving JSON report: {e}")
        raise


# --- Plot artifacts ---
def reward_curve_svg(transcript: Transcript, width: Optional[float] = None, height: Optional[float] = None) -> str:
    """Cumulative mean reward against step, as SVG markup."""
    width = width or settings.chart_width
    height = height or settings.chart_height
    means = transcript.cumulative_means()

    with matplotlib.rc_context(SVG_RC):
        fig = Figure(figsize=(width, height))
        ax = fig.add_subplot(1, 1, 1)
        ax.plot(list(range(len(means))), means, color="#2b6cb0", linewidth=1.2)
        ax.set_xlabel("step")
        ax.set_ylabel("cumulative mean reward")
        ax.set_title(f"seed {transcript.seed}")
        ax.grid(True, linewidth=0.3)
        buffer = io.StringIO()
        fig.savefig(buffer, format="svg", metadata={"Date": None})
    return buffer.getvalue()


def write_reward_curve_svg(transcript: Transcript, path: str) -> str:
    try:
        _write_text(path, reward_curve_svg(transcript))
        logger.info(f"Reward curve saved to: {path}")
        return path
    except OSError as e:
        logger.error(f"Error saving reward curve: {e}")
        raise


# --- Console tables ---
def format_table(record: Dict[str, object], float_digits: int = 4) -> str:
    """Aligned two-column table for console output."""
    rows = []
    for key, value in record.items():
        if isinstance(value, float):
            value = f"{value:.{float_digits}f}"
        rows.append({"field": key, "value": value})
    return pd.DataFrame(rows, columns=["field", "value"]).to_string(index=False)
