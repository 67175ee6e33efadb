"""Keep/drop decisions from scores.

All fraction modes keep exactly ``k = floor(p * n + 0.5)`` pairs.  Records
are ranked by score descending, then id ascending, so selection is a total
order and does not depend on input order.
"""

from __future__ import annotations

import json
import math
import os
import random
from collections.abc import Callable, Iterable, Iterator
from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .corpus import FilterDecision, ScoreRecord
from .errors import BitextError, CoverageError, ScoreFileError

MODES = ("keep_fraction", "absolute", "median_split", "random_fraction")


def keep_count(p: float, n_total: int) -> int:
    """Round-half-up cardinality of a fraction-mode selection."""
    return math.floor(p * n_total + 0.5)


def _check_fraction(p: float) -> None:
    if not (0.0 < p <= 1.0):
        raise BitextError(f"keep fraction must be in (0, 1], got {p}")


@dataclass
class ScoreTable:
    """Columnar scores for one scorer."""

    ids: np.ndarray
    scores: np.ndarray
    scorer_id: str = ""

    def __post_init__(self):
        self.ids = np.ascontiguousarray(self.ids, dtype=np.int64)
        self.scores = np.ascontiguousarray(self.scores, dtype=np.float64) + 0.0
        if self.ids.shape != self.scores.shape or self.ids.ndim != 1:
            raise ValueError("ids and scores must be 1-d arrays of equal length")
        if not np.isfinite(self.scores).all():
            bad = self.ids[~np.isfinite(self.scores)][:10].tolist()
            raise ScoreFileError(f"non-finite scores for ids {bad}")
        if len(np.unique(self.ids)) != len(self.ids):
            raise ScoreFileError("duplicate ids in score table")

    def __len__(self) -> int:
        return len(self.ids)

    @classmethod
    def from_records(cls, records: Iterable[ScoreRecord], scorer_id: str | None = None) -> ScoreTable:
        ids, scores, sid = [], [], scorer_id
        for rec in records:
            ids.append(rec.pair_id)
            scores.append(rec.score)
            if sid is None:
                sid = rec.scorer_id
        return cls(np.array(ids, dtype=np.int64), np.array(scores, dtype=np.float64), sid or "")

    @classmethod
    def read(cls, path: str | os.PathLike, scorer_id: str = "") -> ScoreTable:
        ids, scores = [], []
        for chunk_ids, chunk_scores in iter_score_chunks(path):
            ids.append(chunk_ids)
            scores.append(chunk_scores)
        if not ids:
            return cls(np.empty(0, np.int64), np.empty(0), scorer_id)
        return cls(np.concatenate(ids), np.concatenate(scores), scorer_id)

    def records(self) -> Iterator[ScoreRecord]:
        for pid, s in zip(self.ids.tolist(), self.scores.tolist()):
            yield ScoreRecord(pid, self.scorer_id, s)


def iter_score_chunks(path: str | os.PathLike, chunk_lines: int = 1 << 16) -> Iterator[tuple[np.ndarray, np.ndarray]]:
    """Stream a keyed ``id<TAB>score`` file as (ids, scores) array pairs."""
    with open(path, encoding="utf-8") as fh:
        lineno = 0
        while True:
            lines = fh.readlines(chunk_lines * 24)
            if not lines:
                return
            ids = np.empty(len(lines), np.int64)
            scores = np.empty(len(lines), np.float64)
            for i, line in enumerate(lines):
                parts = line.rstrip("\n").split("\t")
                try:
                    if len(parts) != 2 or "_" in line:
                        raise ValueError
                    ids[i] = int(parts[0])
                    scores[i] = float(parts[1])
                except ValueError:
                    raise ScoreFileError(f"{path}:{lineno + i}: expected 'id<TAB>score'") from None
            if not np.isfinite(scores).all():
                bad = int(np.flatnonzero(~np.isfinite(scores))[0])
                raise ScoreFileError(f"{path}:{lineno + bad}: non-finite score")
            lineno += len(lines)
            yield ids, scores + 0.0


@dataclass
class Decisions:
    """Keep/drop verdicts for an id universe, plus how they were made."""

    ids: np.ndarray
    keep: np.ndarray
    scorer_id: str = ""
    mode: str = ""
    threshold: float = float("nan")
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.ids = np.asarray(self.ids, dtype=np.int64)
        self.keep = np.asarray(self.keep, dtype=bool)

    @property
    def n_total(self) -> int:
        return len(self.ids)

    @property
    def n_kept(self) -> int:
        return int(self.keep.sum())

    def kept_ids(self) -> set[int]:
        return set(self.ids[self.keep].tolist())

    def sorted(self) -> Decisions:
        order = np.argsort(self.ids, kind="stable")
        return Decisions(self.ids[order], self.keep[order], self.scorer_id, self.mode, self.threshold, dict(self.meta))

    def records(self) -> Iterator[FilterDecision]:
        for pid, k in zip(self.ids.tolist(), self.keep.tolist()):
            yield FilterDecision(pid, k, self.scorer_id, self.threshold)

    def write(self, path: str | os.PathLike) -> None:
        d = self.sorted()
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            fh.writelines(f"{pid}\t{int(k)}\n" for pid, k in zip(d.ids.tolist(), d.keep.tolist()))

    @classmethod
    def read(cls, path: str | os.PathLike) -> Decisions:
        ids, keep = [], []
        with open(path, encoding="utf-8") as fh:
            for i, line in enumerate(fh):
                parts = line.rstrip("\n").split("\t")
                if len(parts) != 2 or parts[1] not in ("0", "1"):
                    raise BitextError(f"{path}:{i}: expected 'id<TAB>0|1'")
                try:
                    ids.append(int(parts[0]))
                except ValueError:
                    raise BitextError(f"{path}:{i}: bad id {parts[0]!r}") from None
                keep.append(parts[1] == "1")
        if len(set(ids)) != len(ids):
            raise BitextError(f"{path}: duplicate ids")
        return cls(np.array(ids, dtype=np.int64), np.array(keep, dtype=bool))

    def metadata(self) -> dict:
        out = {"scorer_id": self.scorer_id, "mode": self.mode, "n_total": self.n_total, "k": self.n_kept}
        out["threshold"] = None if math.isnan(self.threshold) else self.threshold
        out.update(self.meta)
        return dict(sorted(out.items()))


@dataclass
class ThresholdPlan:
    mode: str
    keep_fraction: float | None = None
    threshold: float | None = None
    seed: int | None = None
    tie_break: str = field(default="score_desc_id_asc", init=False)

    def __post_init__(self):
        need = {
            "keep_fraction": {"keep_fraction"},
            "absolute": {"threshold"},
            "median_split": set(),
            "random_fraction": {"keep_fraction", "seed"},
        }
        if self.mode not in need:
            raise BitextError(f"unknown threshold mode {self.mode!r}")
        given = {n for n in ("keep_fraction", "threshold", "seed") if getattr(self, n) is not None}
        if given != need[self.mode]:
            raise BitextError(f"mode {self.mode} takes exactly {sorted(need[self.mode])}, got {sorted(given)}")
        if self.keep_fraction is not None:
            _check_fraction(self.keep_fraction)
        if self.threshold is not None and not math.isfinite(self.threshold):
            raise BitextError("threshold must be finite")


def _as_table(scores) -> ScoreTable:
    return scores if isinstance(scores, ScoreTable) else ScoreTable.from_records(scores)


def _check_coverage(table: ScoreTable, n_total: int, universe: Iterable[int] | None) -> None:
    if universe is not None:
        expected = np.fromiter(universe, dtype=np.int64)
        missing = np.setdiff1d(expected, table.ids)
        if len(missing):
            raise CoverageError(f"{len(missing)} pairs have no score", missing[:10].tolist())
        extra = np.setdiff1d(table.ids, expected)
        if len(extra):
            raise CoverageError(f"{len(extra)} scores for unknown pairs", extra[:10].tolist())
        n_total = len(expected)
    if len(table) != n_total:
        raise CoverageError(f"expected {n_total} scores, got {len(table)}")


def boundary_of(table: ScoreTable, mask: np.ndarray) -> tuple[float, int]:
    """Score and id of the last kept record in rank order."""
    kept_scores = table.scores[mask]
    t = float(kept_scores.min())
    bid = int(table.ids[mask][kept_scores == t].max())
    return t, bid


def select_top_fraction(
    scores: ScoreTable | Iterable[ScoreRecord], n_total: int, p: float, universe: Iterable[int] | None = None
) -> Decisions:
    """Keep exactly ``floor(p * n_total + 0.5)`` best-ranked pairs.

    ``threshold`` on the result is the score of the k-th kept record and
    ``meta["boundary_id"]`` its id; together they reproduce the keep set via
    :func:`apply_cutoff`.  Pass ``universe`` (expected ids) to get missing
    ids named in the error.
    """
    _check_fraction(p)
    if n_total <= 0:
        raise BitextError("cannot select from an empty corpus")
    table = _as_table(scores)
    _check_coverage(table, n_total, universe)
    k = keep_count(p, n_total)
    mask = kernels.top_k_mask(table.scores, table.ids, k)
    t, bid = (boundary_of(table, mask) if k else (float("inf"), -1))
    return Decisions(table.ids, mask, table.scorer_id, "keep_fraction", t, {"p": p, "boundary_id": bid})


def select_absolute(scores: ScoreTable | Iterable[ScoreRecord], t: float) -> Decisions:
    if not math.isfinite(t):
        raise BitextError("threshold must be finite")
    table = _as_table(scores)
    return Decisions(table.ids, table.scores >= t, table.scorer_id, "absolute", float(t))


def apply_cutoff(scores: ScoreTable | Iterable[ScoreRecord], threshold: float, boundary_id: int) -> Decisions:
    """Re-apply a fraction-mode boundary: keep ranks at or above (threshold, boundary_id)."""
    table = _as_table(scores)
    keep = (table.scores > threshold) | ((table.scores == threshold) & (table.ids <= boundary_id))
    return Decisions(table.ids, keep, table.scorer_id, "cutoff", float(threshold), {"boundary_id": int(boundary_id)})


def median_split(scores: ScoreTable | Iterable[ScoreRecord], n_total: int, universe: Iterable[int] | None = None) -> Decisions:
    if n_total < 2:
        raise BitextError("median split needs at least 2 pairs")
    d = select_top_fraction(scores, n_total, 0.5, universe)
    d.mode = "median_split"
    return d


def random_select(n_total: int, p: float, seed: int, ids: Iterable[int] | None = None) -> Decisions:
    """Seeded uniform sample of exactly ``floor(p * n_total + 0.5)`` ids without replacement."""
    _check_fraction(p)
    ids = np.arange(n_total, dtype=np.int64) if ids is None else np.fromiter(ids, dtype=np.int64)
    if len(ids) != n_total:
        raise BitextError(f"expected {n_total} ids, got {len(ids)}")
    k = keep_count(p, n_total)
    chosen = random.Random(seed).sample(range(n_total), k)
    keep = np.zeros(n_total, dtype=bool)
    keep[chosen] = True
    return Decisions(ids, keep, "random", "random_fraction", float("nan"), {"p": p, "seed": seed})


# -- out-of-core exact selection -------------------------------------------------

_BITS = 16


def exact_cutoff(
    chunks: Callable[[], Iterable[tuple[np.ndarray, np.ndarray]]], k: int, max_resident: int = 1 << 22
) -> tuple[float, int]:
    """Boundary (score, id) of the k-th ranked record without loading all scores.

    ``chunks`` is called once per pass and must yield the same (ids, scores)
    arrays each time.  Each pass histograms the next 16 bits of the
    order-preserving score key inside the bucket that holds the boundary;
    once that bucket has at most ``max_resident`` records it is loaded and
    resolved exactly.
    """
    if k <= 0:
        raise BitextError("k must be positive")
    prefix, pbits, need = 0, 0, k
    while pbits < 64:
        hist = np.zeros(1 << _BITS, dtype=np.int64)
        for _, scores in chunks():
            hist += kernels.prefix_histogram(kernels.sortable_keys(scores), prefix, pbits, _BITS)
        above = np.cumsum(hist[::-1])  # above[j]: records in the top j+1 buckets
        if above[-1] < need:
            raise BitextError(f"only {int(above[-1])} records, cannot keep {k}")
        j = int(np.searchsorted(above, need))
        bucket = (1 << _BITS) - 1 - j
        need -= int(above[j - 1]) if j else 0
        prefix, pbits = (prefix << _BITS) | bucket, pbits + _BITS
        if hist[bucket] <= max_resident:
            break
    cand_ids, cand_scores = [], []
    shift = np.uint64(64 - pbits)
    for ids, scores in chunks():
        sel = (kernels.sortable_keys(scores) >> shift) == np.uint64(prefix)
        cand_ids.append(ids[sel])
        cand_scores.append(scores[sel])
    ids = np.concatenate(cand_ids)
    scores = np.concatenate(cand_scores)
    if pbits == 64:
        # single key value: only the id order is left to resolve
        return float(scores[0]), int(np.partition(ids, need - 1)[need - 1])
    return boundary_of(ScoreTable(ids, scores), kernels.top_k_mask(scores, ids, need))


# -- one-pass quantile sketch -----------------------------------------------------


class QuantileSketch:
    """Deterministic compactor hierarchy with bounded memory.

    Level ``h`` holds items of weight ``2**h``.  A full level is sorted and
    every other item (alternating start offset) is promoted.  Each
    compaction moves any rank by at most the level weight, so after ``n``
    items the rank error is at most ``levels_compacted * n / capacity``.
    """

    def __init__(self, capacity: int):
        if capacity < 2 or capacity % 2:
            raise ValueError("capacity must be an even integer >= 2")
        self.capacity = capacity
        self.levels: list[list[np.ndarray]] = [[]]
        self._sizes = [0]
        self._flip = [0]
        self.n = 0

    def update(self, values) -> None:
        values = np.asarray(values, dtype=np.float64).ravel()
        self.n += len(values)
        for start in range(0, len(values), self.capacity):
            self._push(0, values[start : start + self.capacity])

    def _push(self, h: int, values: np.ndarray) -> None:
        if h == len(self.levels):
            self.levels.append([])
            self._sizes.append(0)
            self._flip.append(0)
        self.levels[h].append(values)
        self._sizes[h] += len(values)
        while self._sizes[h] >= self.capacity:
            buf = np.sort(np.concatenate(self.levels[h]))
            head, rest = buf[: self.capacity], buf[self.capacity :]
            promoted = head[self._flip[h] :: 2]
            self._flip[h] ^= 1
            self.levels[h] = [rest] if len(rest) else []
            self._sizes[h] = len(rest)
            self._push(h + 1, promoted)

    @property
    def nbytes(self) -> int:
        return sum(a.nbytes for level in self.levels for a in level)

    def kept_threshold(self, fraction: float) -> float:
        """Value ``t`` such that about ``fraction`` of all items are >= t."""
        vals, weights = [], []
        for h, level in enumerate(self.levels):
            for a in level:
                vals.append(a)
                weights.append(np.full(len(a), 1 << h, dtype=np.int64))
        if not vals:
            raise BitextError("no scores")
        v = np.concatenate(vals)
        w = np.concatenate(weights)
        order = np.argsort(-v, kind="stable")
        v, w = v[order], w[order]
        total = int(w.sum())
        target = fraction * total
        j = int(np.searchsorted(np.cumsum(w), target - 1e-9 * total))
        return float(v[min(j, len(v) - 1)])


def sketch_capacity(n_total: int, eps: float) -> tuple[int, int]:
    """Smallest even capacity meeting rank error ``eps`` for ``n_total`` items, and its byte cost."""
    if n_total <= 0:
        raise BitextError("n_total must be positive")
    cap = 2
    while True:
        compacting = math.floor(math.log2(n_total / cap)) + 1 if n_total >= cap else 0
        if compacting <= eps * cap:
            return cap, (compacting + 1) * cap * 8
        cap = max(cap + 2, int(cap * 1.05) // 2 * 2)


def estimate_quantile(
    scores, q: float, memory_budget: int, n_total: int | None = None, eps: float = 0.001
) -> float:
    """Single-pass threshold keeping about ``1 - q`` of the scores.

    ``scores`` is an iterable of floats or of numpy chunks.  The guarantee
    needs the item count, taken from ``n_total`` or ``len(scores)``.  The
    realized kept fraction under ``score >= t`` is within ``eps`` of
    ``1 - q`` unless many scores tie at ``t``; use exact mode then.
    """
    if not (0.0 < q < 1.0):
        raise BitextError(f"q must be in (0, 1), got {q}")
    if n_total is None:
        n_total = len(scores)
    cap, need = sketch_capacity(n_total, eps)
    if memory_budget < need:
        raise BitextError(f"memory budget {memory_budget} B too small for eps={eps} over {n_total} items; need {need} B")
    sketch = QuantileSketch(cap)
    if isinstance(scores, np.ndarray):
        sketch.update(scores)
    else:
        buf: list[float] = []
        for item in scores:
            if isinstance(item, np.ndarray):
                sketch.update(item)
            else:
                buf.append(item)
                if len(buf) >= cap:
                    sketch.update(buf)
                    buf = []
        if buf:
            sketch.update(buf)
    if sketch.n > n_total:
        raise BitextError(f"saw {sketch.n} scores but n_total was {n_total}; guarantee void")
    return sketch.kept_threshold(1.0 - q)


def write_threshold_meta(decisions: Decisions, path: str | os.PathLike) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(decisions.metadata(), fh, indent=2, sort_keys=True)
        fh.write("\n")
