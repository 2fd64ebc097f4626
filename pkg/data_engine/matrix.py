from dataclasses import dataclass
from typing import Dict, FrozenSet, Literal, Optional, Tuple

import numpy as np
from scipy import sparse

from data_engine.interactions import InteractionLog
from utils.logger import get_logger

logger = get_logger(__name__)

Aggregation = Literal["last", "mean"]
Pair = Tuple[str, str]


def observed_feedback(log: InteractionLog, aggregation: Aggregation = "last") -> Dict[Pair, float]:
    """Per (user, item) feedback under the aggregation rule; only observed pairs appear."""
    if aggregation == "last":
        cells: Dict[Pair, float] = {}
        # events are timestamp-sorted, so the final write is the latest event
        for e in log.events:
            cells[(e.user, e.item)] = e.feedback
        return cells

    if aggregation == "mean":
        totals: Dict[Pair, float] = {}
        counts: Dict[Pair, int] = {}
        for e in log.events:
            key = (e.user, e.item)
            totals[key] = totals.get(key, 0.0) + e.feedback
            counts[key] = counts.get(key, 0) + 1
        return {key: totals[key] / counts[key] for key in totals}

    raise ValueError(f"Unknown aggregation: {aggregation!r} (expected 'last' or 'mean')")


@dataclass(frozen=True)
class InteractionMatrix:
    """User-item matrix where absent cells are missing, never zero."""
    users: Tuple[str, ...]
    items: Tuple[str, ...]
    values: sparse.csr_matrix
    mask: sparse.csr_matrix
    aggregation: str
    _cells: Dict[Pair, float]

    @property
    def shape(self) -> Tuple[int, int]:
        return len(self.users), len(self.items)

    def get(self, user: str, item: str) -> Optional[float]:
        return self._cells.get((user, item))

    def is_present(self, user: str, item: str) -> bool:
        return (user, item) in self._cells

    def present_pairs(self) -> FrozenSet[Pair]:
        return frozenset(self._cells)

    def to_dense(self) -> np.ndarray:
        """Dense copy with NaN in every missing cell."""
        dense = np.full(self.shape, np.nan)
        rows, cols = self.mask.nonzero()
        dense[rows, cols] = np.asarray(self.values[rows, cols]).ravel()
        return dense


def to_matrix(log: InteractionLog, aggregation: Aggregation = "last") -> InteractionMatrix:
    cells = observed_feedback(log, aggregation)
    users = log.sorted_users()
    items = log.sorted_items()
    user_index = {u: i for i, u in enumerate(users)}
    item_index = {it: j for j, it in enumerate(items)}

    keys = sorted(cells)
    rows = np.array([user_index[u] for u, _ in keys], dtype=np.int64)
    cols = np.array([item_index[it] for _, it in keys], dtype=np.int64)
    data = np.array([cells[k] for k in keys], dtype=np.float64)
    shape = (len(users), len(items))

    # explicit zeros stay stored in values; mask is the source of truth for presence
    values = sparse.csr_matrix((data, (rows, cols)), shape=shape)
    mask = sparse.csr_matrix((np.ones(len(keys), dtype=bool), (rows, cols)), shape=shape)

    logger.info(f"Built {shape[0]}x{shape[1]} matrix with {len(keys)} present cells ({aggregation})")
    return InteractionMatrix(
        users=users,
        items=items,
        values=values,
        mask=mask,
        aggregation=aggregation,
        _cells=cells,
    )
