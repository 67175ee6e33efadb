"""Analyses over filter decisions: noise detection, overlap, divergence, length shift."""

from __future__ import annotations

import json
import random
from collections.abc import Iterable, Mapping
from dataclasses import asdict, dataclass, field

import numpy as np

from .corpus import CorpusStats, SentencePair
from .errors import CoverageError
from .noise import NoiseCategory
from .thresholding import Decisions, ScoreTable, median_split

SCHEMA_VERSION = 1


def _dump(obj: dict, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(obj, fh, indent=2, sort_keys=True, ensure_ascii=False)
        fh.write("\n")


@dataclass
class CategoryResult:
    n_noise: int
    n_noise_kept: int
    pct_kept: float


@dataclass
class NoiseEvalReport:
    scorer_id: str
    per_category: dict[str, CategoryResult]
    threshold: float
    n_total: int
    n_kept: int
    n_clean: int = 0
    n_clean_kept: int = 0

    def to_dict(self) -> dict:
        return {
            "schema_version": SCHEMA_VERSION,
            "report": "noise_eval",
            "scorer_id": self.scorer_id,
            "threshold": self.threshold,
            "n_total": self.n_total,
            "n_kept": self.n_kept,
            "n_clean": self.n_clean,
            "n_clean_kept": self.n_clean_kept,
            "clean_noise_ratio": f"{self.n_clean}:{self.n_total - self.n_clean}",
            "per_category": {k: asdict(v) for k, v in sorted(self.per_category.items())},
        }

    def to_text(self) -> str:
        rows = [("category", "noise", "kept", "% kept")]
        for name, r in sorted(self.per_category.items()):
            rows.append((name, str(r.n_noise), str(r.n_noise_kept), f"{r.pct_kept:.1f}"))
        width = [max(len(row[i]) for row in rows) for i in range(4)]
        lines = [
            f"scorer {self.scorer_id}: kept {self.n_kept}/{self.n_total} at threshold {self.threshold!r}",
        ]
        for row in rows:
            lines.append("  ".join([row[0].ljust(width[0])] + [c.rjust(w) for c, w in zip(row[1:], width[1:])]))
        return "\n".join(lines) + "\n"

    def write(self, path) -> None:
        _dump(self.to_dict(), path)


def eval_noise(labels: Mapping[int, NoiseCategory | str], scores: ScoreTable | Iterable) -> NoiseEvalReport:
    """Median-split the combined clean+noise scores and count surviving noise.

    0% kept for a category means every corrupted pair was filtered out.
    """
    table = scores if isinstance(scores, ScoreTable) else ScoreTable.from_records(scores)
    label_ids = np.fromiter(labels.keys(), dtype=np.int64)
    missing = np.setdiff1d(label_ids, table.ids)
    if len(missing):
        raise CoverageError("labelled pairs without a score", missing.tolist())
    unlabeled = np.setdiff1d(table.ids, label_ids)
    if len(unlabeled):
        raise CoverageError("scored pairs without a label", unlabeled.tolist())
    decisions = median_split(table, len(table))
    counts: dict[str, list[int]] = {}
    n_clean = n_clean_kept = 0
    for pid, keep in zip(decisions.ids.tolist(), decisions.keep.tolist()):
        cat = NoiseCategory(labels[pid])
        if cat is NoiseCategory.CLEAN:
            n_clean += 1
            n_clean_kept += keep
            continue
        c = counts.setdefault(cat.value, [0, 0])
        c[0] += 1
        c[1] += keep
    per_category = {name: CategoryResult(n, kept, 100.0 * kept / n) for name, (n, kept) in counts.items()}
    return NoiseEvalReport(
        table.scorer_id, per_category, decisions.threshold, decisions.n_total, decisions.n_kept, n_clean, n_clean_kept
    )


@dataclass
class OverlapReport:
    n_total: int
    n_kept_a: int
    n_kept_b: int
    n_common: int
    n_only_a: int
    n_only_b: int
    n_neither: int
    jaccard: float
    label_a: str = "a"
    label_b: str = "b"

    def swapped(self) -> OverlapReport:
        return OverlapReport(
            self.n_total, self.n_kept_b, self.n_kept_a, self.n_common, self.n_only_b, self.n_only_a,
            self.n_neither, self.jaccard, self.label_b, self.label_a,
        )

    def to_dict(self) -> dict:
        out = asdict(self)
        out.update(schema_version=SCHEMA_VERSION, report="overlap")
        return dict(sorted(out.items()))

    def to_text(self) -> str:
        return (
            f"total {self.n_total}\n"
            f"kept by {self.label_a}: {self.n_kept_a}   kept by {self.label_b}: {self.n_kept_b}\n"
            f"common {self.n_common}   only {self.label_a} {self.n_only_a}   only {self.label_b} {self.n_only_b}"
            f"   neither {self.n_neither}\n"
            f"jaccard {self.jaccard:.4f}\n"
        )

    def write(self, path) -> None:
        _dump(self.to_dict(), path)


def _aligned(a: Decisions, b: Decisions) -> tuple[Decisions, Decisions]:
    a, b = a.sorted(), b.sorted()
    if len(a.ids) != len(b.ids) or not np.array_equal(a.ids, b.ids):
        diff = np.setxor1d(a.ids, b.ids)
        raise CoverageError("decision sets cover different ids; first divergent id", diff[:1].tolist())
    return a, b


def compare_filters(a: Decisions, b: Decisions) -> OverlapReport:
    """Contingency counts of two keep sets over the same ids.

    Jaccard is 1.0 when neither filter keeps anything.
    """
    a, b = _aligned(a, b)
    ka, kb = a.keep, b.keep
    common = int((ka & kb).sum())
    only_a = int((ka & ~kb).sum())
    only_b = int((~ka & kb).sum())
    union = common + only_a + only_b
    return OverlapReport(
        n_total=len(a.ids),
        n_kept_a=common + only_a,
        n_kept_b=common + only_b,
        n_common=common,
        n_only_a=only_a,
        n_only_b=only_b,
        n_neither=len(a.ids) - union,
        jaccard=common / union if union else 1.0,
        label_a=a.scorer_id or "a",
        label_b=b.scorer_id or "b",
    )


def intersect_filters(a: Decisions, b: Decisions) -> Decisions:
    a, b = _aligned(a, b)
    keep = a.keep & b.keep
    label = f"{a.scorer_id or 'a'}&{b.scorer_id or 'b'}"
    return Decisions(a.ids, keep, label, "intersection", float("nan"), {"n_kept": int(keep.sum())})


def sample_divergence(
    corpus: Iterable[SentencePair],
    a: Decisions,
    b: Decisions,
    n_per_bucket: int,
    seed: int,
    scores: Mapping[str, ScoreTable] | None = None,
) -> tuple[list[dict], list[dict]]:
    """Seeded samples of pairs kept by exactly one of the two filters.

    Returns rows for kept-by-a-only and kept-by-b-only, each sorted by id,
    with the pair text and any supplied scores attached.
    """
    a, b = _aligned(a, b)
    only_a = a.ids[a.keep & ~b.keep].tolist()
    only_b = a.ids[~a.keep & b.keep].tolist()
    rng = random.Random(seed)
    pick_a = sorted(rng.sample(only_a, min(n_per_bucket, len(only_a))))
    pick_b = sorted(rng.sample(only_b, min(n_per_bucket, len(only_b))))
    wanted = {pid: (a.scorer_id or "a") for pid in pick_a}
    wanted.update({pid: (b.scorer_id or "b") for pid in pick_b})
    lookups = {}
    for sid, table in (scores or {}).items():
        lookups[sid] = dict(zip(table.ids.tolist(), table.scores.tolist()))
    rows: dict[int, dict] = {}
    for pair in corpus:
        if pair.id in wanted:
            rows[pair.id] = {
                "id": pair.id,
                "src": pair.src,
                "tgt": pair.tgt,
                "kept_by": wanted[pair.id],
                "scores": {sid: lk[pair.id] for sid, lk in sorted(lookups.items()) if pair.id in lk},
            }
    absent = [pid for pid in wanted if pid not in rows]
    if absent:
        raise CoverageError("decision ids missing from corpus", sorted(absent))
    return [rows[i] for i in pick_a], [rows[i] for i in pick_b]


@dataclass
class FilterReport:
    before: dict = field(default_factory=dict)
    after: dict = field(default_factory=dict)
    delta: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {"schema_version": SCHEMA_VERSION, "report": "length_shift", **asdict(self)}

    def to_text(self) -> str:
        lines = [f"{'':16}{'before':>12}{'after':>12}{'delta':>12}"]
        for key in ("n_pairs", "mean_src_tokens", "mean_tgt_tokens"):
            fmt = "{:>12d}" if key == "n_pairs" else "{:>12.3f}"
            sign = "{:>+12d}" if key == "n_pairs" else "{:>+12.3f}"
            lines.append(
                f"{key:16}" + fmt.format(self.before[key]) + fmt.format(self.after[key]) + sign.format(self.delta[key])
            )
        return "\n".join(lines) + "\n"


def filter_report(before: CorpusStats, after: CorpusStats) -> FilterReport:
    def summary(s: CorpusStats) -> dict:
        return {"n_pairs": s.n_pairs, "mean_src_tokens": s.mean_src_tokens, "mean_tgt_tokens": s.mean_tgt_tokens}

    b, a = summary(before), summary(after)
    return FilterReport(b, a, {k: a[k] - b[k] for k in b})
