"""Turn rating logs and match results into dynamic comparison observations.

Ratings: within a merged window the score of an item is its mean rating, every
pair of items rated in the window is compared, and ``y_ij = s_i - s_j``.

Matches: for each season, ``s_i`` is the mean number of goals team ``i``
scored against ``j``; a window averages ``s_i - s_j`` over the seasons in
which the pair actually met.

Item ids are interned to dense indices in first-appearance order.
"""

from __future__ import annotations

import csv
import io
import logging
from collections import defaultdict
from dataclasses import dataclass
from datetime import datetime, timezone
from typing import Hashable, Iterable, NamedTuple, Sequence

import numpy as np

from .errors import PreconditionError
from .graphseq import GraphSequence, ObservationSet, is_connected

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class ScoreRecord:
    time_unit: int
    item: Hashable
    score: float
    counterpart: Hashable | None = None

    def __post_init__(self):
        if self.time_unit < 0:
            raise ValueError(f"time_unit must be >= 0, got {self.time_unit}")
        if not np.isfinite(self.score):
            raise ValueError(f"score must be finite, got {self.score}")


@dataclass(frozen=True)
class MergePlan:
    """Consecutive raw time units grouped into ``T + 1`` windows."""

    groups: tuple[tuple[int, ...], ...]
    connected: tuple[bool, ...]

    def __post_init__(self):
        if not self.groups:
            raise ValueError("a merge plan needs at least one window")
        if len(self.connected) != len(self.groups):
            raise ValueError("one connectivity flag per window is required")
        flat = [u for grp in self.groups for u in grp]
        if any(not grp for grp in self.groups):
            raise ValueError("windows must be non-empty")
        if flat != list(range(flat[0], flat[0] + len(flat))):
            raise ValueError("windows must be contiguous, ordered and disjoint")

    @property
    def horizon_T(self) -> int:
        return len(self.groups) - 1

    def window_of(self) -> dict[int, int]:
        return {u: w for w, grp in enumerate(self.groups) for u in grp}


class IngestResult(NamedTuple):
    graph: GraphSequence
    observations: ObservationSet
    items: list


def intern_items(records: Iterable[ScoreRecord]) -> dict:
    index: dict = {}
    for r in records:
        for key in (r.item, r.counterpart):
            if key is not None and key not in index:
                index[key] = len(index)
    return index


def _window_lookup(records: Sequence[ScoreRecord], plan: MergePlan) -> dict[int, int]:
    lookup = plan.window_of()
    missing = sorted({r.time_unit for r in records} - lookup.keys())
    if missing:
        raise PreconditionError(f"time units {missing[:5]} are not covered by the merge plan")
    return lookup


def _assemble(n: int, per_window: list[dict[tuple[int, int], float]], items: list) -> IngestResult:
    for w, d in enumerate(per_window):
        if not d:
            raise PreconditionError(f"window {w} produced no comparisons")
    records = [(w, i, j, y) for w, d in enumerate(per_window) for (i, j), y in sorted(d.items())]
    obs = ObservationSet.from_records(n, len(per_window) - 1, records)
    return IngestResult(obs.graph, obs, items)


def build_observations_ratings(records: Sequence[ScoreRecord], plan: MergePlan) -> IngestResult:
    index = intern_items(records)
    lookup = _window_lookup(records, plan)
    sums = [defaultdict(float) for _ in plan.groups]
    counts = [defaultdict(int) for _ in plan.groups]
    for r in records:
        w, i = lookup[r.time_unit], index[r.item]
        sums[w][i] += r.score
        counts[w][i] += 1
    per_window = []
    for s, c in zip(sums, counts):
        rated = sorted(s)
        mean = {i: s[i] / c[i] for i in rated}
        per_window.append({(a, b): mean[a] - mean[b]
                           for x, a in enumerate(rated) for b in rated[x + 1:]})
    return _assemble(len(index), per_window, list(index))


def build_observations_matches(records: Sequence[ScoreRecord], plan: MergePlan) -> IngestResult:
    """Each record holds the goals ``item`` scored against ``counterpart`` in one game."""
    index = intern_items(records)
    lookup = _window_lookup(records, plan)
    goals: dict[tuple[int, int, int], list[float]] = defaultdict(list)
    for r in records:
        if r.counterpart is None:
            raise ValueError(f"match record without a counterpart: {r}")
        goals[(r.time_unit, index[r.item], index[r.counterpart])].append(r.score)

    diffs: list[dict[tuple[int, int], list[float]]] = [defaultdict(list) for _ in plan.groups]
    for (t, i, j), scored in goals.items():
        if (t, j, i) not in goals:
            raise ValueError(f"season {t}: goals of {i} vs {j} recorded without the reverse side")
        if i < j:
            diffs[lookup[t]][(i, j)].append(np.mean(scored) - np.mean(goals[(t, j, i)]))
    per_window = [{pair: float(np.mean(v)) for pair, v in d.items()} for d in diffs]
    return _assemble(len(index), per_window, list(index))


def plan_merge_until_connected(records: Sequence[ScoreRecord], mode: str = "ratings") -> MergePlan:
    """Greedily merge consecutive time units until each window's graph is connected.

    For ratings the window graph is a clique on the rated items, so a window is
    connected once every item of the dataset has been rated in it. Trailing
    units without any record fold into the previous window; a trailing window
    that never becomes connected is kept and flagged.
    """
    if mode != "ratings":
        raise ValueError(f"unsupported merge mode {mode!r}; use plan_fixed_width for match data")
    if not records:
        raise ValueError("need at least one record")
    all_items = {r.item for r in records}
    by_unit: dict[int, set] = defaultdict(set)
    for r in records:
        by_unit[r.time_unit].add(r.item)
    first, last = min(by_unit), max(by_unit)

    groups: list[list[int]] = []
    flags: list[bool] = []
    current: list[int] = []
    seen: set = set()
    for u in range(first, last + 1):
        current.append(u)
        seen |= by_unit.get(u, set())
        if seen == all_items:
            groups.append(current)
            flags.append(True)
            current, seen = [], set()
    if current:
        if not seen and groups:
            groups[-1].extend(current)
        else:
            log.warning("last window %s is not connected", current)
            groups.append(current)
            flags.append(False)
    return MergePlan(tuple(tuple(g) for g in groups), tuple(flags))


def plan_fixed_width(records: Sequence[ScoreRecord], width: int) -> MergePlan:
    """Windows of ``width`` consecutive units (the last may be shorter); connectivity not checked."""
    if width < 1:
        raise ValueError(f"width must be >= 1, got {width}")
    units = [r.time_unit for r in records]
    first, last = min(units), max(units)
    span = list(range(first, last + 1))
    groups = tuple(tuple(span[i:i + width]) for i in range(0, len(span), width))
    return MergePlan(groups, tuple(False for _ in groups))


def window_connectivity(result: IngestResult) -> list[bool]:
    return [is_connected(result.graph, k) for k in range(result.graph.num_steps)]


# -- raw CSV readers ----------------------------------------------------------

def month_index(date: str) -> int:
    """Absolute month number (``12 * year + month - 1``) of an ISO date, taken in UTC."""
    dt = datetime.fromisoformat(date.strip())
    if dt.tzinfo is not None:
        dt = dt.astimezone(timezone.utc)
    return 12 * dt.year + dt.month - 1


def read_ratings_csv(text: str, top_n: int | None = None) -> list[ScoreRecord]:
    """Parse ``date,item,user,score`` rows into records with months counted from the earliest date.

    ``top_n`` keeps only the most-rated items (ties by first appearance).
    """
    rows = list(csv.DictReader(io.StringIO(text)))
    if not rows:
        return []
    months = [month_index(r["date"]) for r in rows]
    base = min(months)
    records = [ScoreRecord(m - base, r["item"], float(r["score"])) for m, r in zip(months, rows)]
    if top_n is not None:
        counts: dict = {}
        for r in records:
            counts[r.item] = counts.get(r.item, 0) + 1
        order = {item: pos for pos, item in enumerate(counts)}
        keep = set(sorted(counts, key=lambda it: (-counts[it], order[it]))[:top_n])
        records = [r for r in records if r.item in keep]
    return records


def _season_key(label: str):
    try:
        return (0, int(label), label)
    except ValueError:
        return (1, 0, label)


def read_matches_csv(text: str) -> list[ScoreRecord]:
    """Parse ``season,home,away,home_goals,away_goals`` rows; each game yields one record per side.

    Seasons are indexed by their sorted labels.
    """
    rows = list(csv.DictReader(io.StringIO(text)))
    seasons = sorted({r["season"].strip() for r in rows}, key=_season_key)
    idx = {s: k for k, s in enumerate(seasons)}
    out = []
    for r in rows:
        t = idx[r["season"].strip()]
        home, away = r["home"].strip(), r["away"].strip()
        out.append(ScoreRecord(t, home, float(r["home_goals"]), away))
        out.append(ScoreRecord(t, away, float(r["away_goals"]), home))
    return out


def items_to_csv(items: list) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["index", "item"])
    for k, item in enumerate(items):
        w.writerow([k, item])
    return buf.getvalue()
