import math
import re
from pathlib import Path
from typing import Dict, List, Optional, Union

import pandas as pd
from pydantic import BaseModel

from data_engine.interactions import ColumnSchema, InteractionEvent, InteractionLog, Scalar
from utils.errors import MissingColumn, ParseError
from utils.logger import get_logger

logger = get_logger(__name__)

_DECIMAL = re.compile(r"^[+-]?(\d+(\.\d*)?|\.\d+)([eE][+-]?\d+)?$")
_INTEGER = re.compile(r"^[+-]?\d+$")
_PANDAS_LINE = re.compile(r"line (\d+)")


class ValidationReport(BaseModel):
    duplicate_count: int
    missing_propensity_count: int
    out_of_range_count: int
    event_count: int
    user_count: int
    item_count: int
    density: float


def _cell(value) -> str:
    # short rows come back from pandas as NaN even with dtype=str
    return value.strip() if isinstance(value, str) else ""


def _parse_real(text: str, row: int, column: str) -> float:
    if not _DECIMAL.match(text):
        raise ParseError(row, f"{column} is not a decimal real: {text!r}")
    value = float(text)
    if not math.isfinite(value):
        raise ParseError(row, f"{column} is not finite: {text!r}")
    return value


def _parse_context(text: str) -> Scalar:
    if _INTEGER.match(text):
        return int(text)
    if _DECIMAL.match(text):
        return float(text)
    return text


def load_interaction_log(path: Union[str, Path], schema: Optional[ColumnSchema] = None) -> InteractionLog:
    schema = schema or ColumnSchema()
    path = Path(path)

    try:
        frame = pd.read_csv(path, dtype=str, keep_default_na=False, encoding="utf-8")
    except pd.errors.ParserError as e:
        match = _PANDAS_LINE.search(str(e))
        # pandas counts the header as line 1
        row = int(match.group(1)) - 1 if match else 0
        raise ParseError(row, f"malformed CSV row ({e})")
    except pd.errors.EmptyDataError:
        raise MissingColumn(schema.user_id)

    header = list(frame.columns)
    for role in ("user_id", "item_id", "feedback", "timestamp"):
        column = getattr(schema, role)
        if column not in header:
            raise MissingColumn(column)

    propensity_column = schema.propensity if schema.propensity in header else None
    role_names = set(schema.role_columns().values())
    context_columns = [c for c in header if c not in role_names]

    declared = schema.feedback_range
    events: List[InteractionEvent] = []
    for row, record in enumerate(frame.to_dict(orient="records"), start=1):
        user = _cell(record[schema.user_id])
        item = _cell(record[schema.item_id])
        if not user:
            raise ParseError(row, f"{schema.user_id} is empty")
        if not item:
            raise ParseError(row, f"{schema.item_id} is empty")

        feedback = _parse_real(_cell(record[schema.feedback]), row, schema.feedback)
        if declared is not None and not declared[0] <= feedback <= declared[1]:
            raise ParseError(row, f"{schema.feedback} {feedback} outside declared range {list(declared)}")

        stamp = _cell(record[schema.timestamp])
        if not _INTEGER.match(stamp):
            raise ParseError(row, f"{schema.timestamp} is not an integer: {stamp!r}")

        propensity = None
        if propensity_column:
            text = _cell(record[propensity_column])
            if text:
                propensity = _parse_real(text, row, propensity_column)
                if not 0.0 < propensity <= 1.0:
                    raise ParseError(row, f"{propensity_column} must be in (0, 1], got {text}")

        context: Dict[str, Scalar] = {}
        for column in context_columns:
            text = _cell(record[column])
            if text:
                context[column] = _parse_context(text)

        events.append(InteractionEvent(
            user=user,
            item=item,
            feedback=feedback,
            timestamp=int(stamp),
            propensity=propensity,
            context=context,
        ))

    log = InteractionLog.from_events(events, feedback_range=declared)
    logger.info(
        f"Loaded {len(log)} events ({len(log.users)} users, {len(log.items)} items) from {path}"
    )
    return log


def _format_scalar(value: Scalar) -> str:
    if isinstance(value, float):
        return repr(value)
    return str(value)


def save_interaction_log(log: InteractionLog, path: Union[str, Path], schema: Optional[ColumnSchema] = None) -> Path:
    """
    Write the log as canonical CSV.

    The declared feedback range is not part of the file: load_interaction_log
    reads it back equal only under a schema declaring the same range.
    """
    schema = schema or ColumnSchema()
    path = Path(path)

    with_propensity = bool(schema.propensity) and any(e.propensity is not None for e in log.events)
    context_columns = sorted(log.context_keys)

    columns = [schema.user_id, schema.item_id, schema.feedback, schema.timestamp]
    if with_propensity:
        columns.append(schema.propensity)
    columns.extend(context_columns)

    rows = []
    for e in log.events:
        row = [e.user, e.item, repr(float(e.feedback)), str(e.timestamp)]
        if with_propensity:
            row.append("" if e.propensity is None else repr(float(e.propensity)))
        row.extend(_format_scalar(e.context[c]) if c in e.context else "" for c in context_columns)
        rows.append(row)

    path.parent.mkdir(parents=True, exist_ok=True)
    pd.DataFrame(rows, columns=columns, dtype=str).to_csv(path, index=False, lineterminator="\n")
    logger.info(f"Saved {len(log)} events to {path}")
    return path


def validate(log: InteractionLog, feedback_range=None) -> ValidationReport:
    f_min, f_max = feedback_range or log.feedback_range

    seen = set()
    duplicates = 0
    for e in log.events:
        key = (e.user, e.item, e.timestamp)
        if key in seen:
            duplicates += 1
        seen.add(key)

    pairs = {(e.user, e.item) for e in log.events}
    cells = len(log.users) * len(log.items)

    return ValidationReport(
        duplicate_count=duplicates,
        missing_propensity_count=sum(1 for e in log.events if e.propensity is None),
        out_of_range_count=sum(1 for e in log.events if not f_min <= e.feedback <= f_max),
        event_count=len(log),
        user_count=len(log.users),
        item_count=len(log.items),
        density=len(pairs) / cells if cells else 0.0,
    )
