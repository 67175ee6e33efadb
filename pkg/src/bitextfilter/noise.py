"""Synthetic noise benchmarks built from a clean bitext.

Each generator returns :class:`LabeledPair` objects carrying the corrupted
pair, its category, and the id of the clean pair it came from.  All
randomness comes from ``random.Random`` seeded per call, so identical
inputs and seeds give identical output on every platform.
"""

from __future__ import annotations

import logging
import math
import random
from collections.abc import Iterable, Sequence
from dataclasses import dataclass, field, replace
from enum import Enum

from .corpus import SentencePair, tokenize
from .errors import BitextError

log = logging.getLogger(__name__)


class NoiseCategory(str, Enum):
    CLEAN = "clean"
    MISALIGNED = "misaligned"
    MISORDERED_SRC = "misordered_src"
    MISORDERED_TGT = "misordered_tgt"
    WRONG_LANGUAGE = "wrong_language"
    UNTRANSLATED_SRC = "untranslated_src"
    UNTRANSLATED_TGT = "untranslated_tgt"
    OVERTRANSLATION = "overtranslation"
    UNDERTRANSLATION = "undertranslation"


NOISE_CATEGORIES = [c for c in NoiseCategory if c is not NoiseCategory.CLEAN]
DEFAULT_TRUNCATE_RANGE = (0.2, 0.5)


@dataclass(frozen=True)
class LabeledPair:
    pair: SentencePair
    label: NoiseCategory
    origin_id: int


@dataclass(frozen=True)
class NoiseSpec:
    category: NoiseCategory
    n_samples: int
    seed: int
    donor_path: str | None = None
    truncate_range: tuple[float, float] = DEFAULT_TRUNCATE_RANGE

    def __post_init__(self):
        object.__setattr__(self, "category", NoiseCategory(self.category))
        if self.category is NoiseCategory.CLEAN:
            raise BitextError("clean is not a noise category")
        if (self.donor_path is not None) != (self.category is NoiseCategory.WRONG_LANGUAGE):
            raise BitextError("a donor corpus is required for wrong_language and only for it")
        low, high = self.truncate_range
        if not (0.0 < low < high < 1.0):
            raise BitextError(f"truncate range must satisfy 0 < low < high < 1, got {self.truncate_range}")


def sample_clean(pairs: Iterable[SentencePair], n: int, seed: int) -> list[SentencePair]:
    """Seeded reservoir sample of ``n`` distinct pairs, returned in id order."""
    rng = random.Random(seed)
    reservoir: list[SentencePair] = []
    seen = 0
    for seen, pair in enumerate(pairs, start=1):
        if len(reservoir) < n:
            reservoir.append(pair)
        else:
            j = rng.randrange(seen)
            if j < n:
                reservoir[j] = pair
    if seen < n:
        raise BitextError(f"corpus has {seen} pairs, cannot sample {n}")
    return sorted(reservoir, key=lambda p: p.id)


def derangement(n: int, rng: random.Random) -> list[int]:
    """Uniform random permutation of ``range(n)`` with no fixed point (n >= 2)."""
    if n < 2:
        raise BitextError("a derangement needs at least 2 elements")
    perm = list(range(n))
    while True:
        rng.shuffle(perm)
        if all(i != j for i, j in enumerate(perm)):
            return perm


def make_misaligned(pairs: Sequence[SentencePair], seed: int) -> list[LabeledPair]:
    perm = derangement(len(pairs), random.Random(seed))
    return [
        LabeledPair(replace(p, tgt=pairs[j].tgt), NoiseCategory.MISALIGNED, p.id) for p, j in zip(pairs, perm)
    ]


def _shuffle_tokens(text: str, rng: random.Random) -> str:
    tokens = tokenize(text)
    if len(set(tokens)) < 2:
        return text  # nothing to reorder
    shuffled = tokens[:]
    while shuffled == tokens:
        rng.shuffle(shuffled)
    return " ".join(shuffled)


def make_misordered(pairs: Sequence[SentencePair], side: str, seed: int) -> list[LabeledPair]:
    """Shuffle the words of one side.

    Sentences with fewer than two distinct tokens cannot be reordered; they
    pass through unchanged but keep their label.
    """
    rng = random.Random(seed)
    if side == "src":
        label = NoiseCategory.MISORDERED_SRC
        return [LabeledPair(replace(p, src=_shuffle_tokens(p.src, rng)), label, p.id) for p in pairs]
    if side == "tgt":
        label = NoiseCategory.MISORDERED_TGT
        return [LabeledPair(replace(p, tgt=_shuffle_tokens(p.tgt, rng)), label, p.id) for p in pairs]
    raise BitextError(f"side must be 'src' or 'tgt', got {side!r}")


def make_wrong_language(
    pairs: Sequence[SentencePair], donors: Iterable[SentencePair], seed: int
) -> list[LabeledPair]:
    """Replace each target with the target of a randomly drawn donor pair."""
    donors = list(donors)
    if not donors:
        raise BitextError("donor corpus is empty")
    corpus_langs = {p.tgt_lang for p in pairs}
    for d in donors:
        if not d.tgt_lang:
            raise BitextError(f"donor pair {d.id} has no target language tag")
        if d.tgt_lang in corpus_langs:
            raise BitextError(f"donor language {d.tgt_lang!r} equals the corpus target language")
    rng = random.Random(seed)
    out = []
    for p in pairs:
        d = donors[rng.randrange(len(donors))]
        out.append(LabeledPair(replace(p, tgt=d.tgt, tgt_lang=d.tgt_lang), NoiseCategory.WRONG_LANGUAGE, p.id))
    return out


def make_untranslated(pairs: Sequence[SentencePair], direction: str) -> list[LabeledPair]:
    if direction == "src_to_tgt":
        return [LabeledPair(replace(p, tgt=p.src), NoiseCategory.UNTRANSLATED_SRC, p.id) for p in pairs]
    if direction == "tgt_to_src":
        return [LabeledPair(replace(p, src=p.tgt), NoiseCategory.UNTRANSLATED_TGT, p.id) for p in pairs]
    raise BitextError(f"direction must be 'src_to_tgt' or 'tgt_to_src', got {direction!r}")


def truncated_length(n_tokens: int, fraction: float) -> int:
    """Tokens kept after cutting ``fraction`` off the end; between 1 and n-1."""
    kept = math.ceil(n_tokens * (1.0 - fraction) - 1e-9)
    return min(max(kept, 1), n_tokens - 1)


def make_truncated(
    pairs: Sequence[SentencePair],
    side: str,
    truncate_range: tuple[float, float] = DEFAULT_TRUNCATE_RANGE,
    seed: int = 0,
) -> tuple[list[LabeledPair], int]:
    """Cut a trailing fraction of one side's tokens.

    Truncating the source gives overtranslation (the target now says more),
    truncating the target gives undertranslation.  Returns the corrupted
    pairs and the number of pairs skipped for having fewer than 2 tokens.
    """
    low, high = truncate_range
    if not (0.0 < low < high < 1.0):
        raise BitextError(f"truncate range must satisfy 0 < low < high < 1, got {truncate_range}")
    if side not in ("src", "tgt"):
        raise BitextError(f"side must be 'src' or 'tgt', got {side!r}")
    label = NoiseCategory.OVERTRANSLATION if side == "src" else NoiseCategory.UNDERTRANSLATION
    rng = random.Random(seed)
    out, skipped = [], 0
    for p in pairs:
        tokens = tokenize(getattr(p, side))
        if len(tokens) < 2:
            skipped += 1
            continue
        keep = truncated_length(len(tokens), rng.uniform(low, high))
        out.append(LabeledPair(replace(p, **{side: " ".join(tokens[:keep])}), label, p.id))
    if skipped:
        log.warning("skipped %d pairs with fewer than 2 %s tokens", skipped, side)
    return out, skipped


def _eligible(category: NoiseCategory, pair: SentencePair) -> bool:
    if category is NoiseCategory.OVERTRANSLATION:
        return len(tokenize(pair.src)) >= 2
    if category is NoiseCategory.UNDERTRANSLATION:
        return len(tokenize(pair.tgt)) >= 2
    return True


def corrupt(
    category: NoiseCategory,
    pairs: Sequence[SentencePair],
    seed: int,
    donors: Sequence[SentencePair] | None = None,
    truncate_range: tuple[float, float] = DEFAULT_TRUNCATE_RANGE,
) -> list[LabeledPair]:
    category = NoiseCategory(category)
    if category is NoiseCategory.MISALIGNED:
        return make_misaligned(pairs, seed)
    if category is NoiseCategory.MISORDERED_SRC:
        return make_misordered(pairs, "src", seed)
    if category is NoiseCategory.MISORDERED_TGT:
        return make_misordered(pairs, "tgt", seed)
    if category is NoiseCategory.WRONG_LANGUAGE:
        if donors is None:
            raise BitextError("wrong_language needs a donor corpus")
        return make_wrong_language(pairs, donors, seed)
    if category is NoiseCategory.UNTRANSLATED_SRC:
        return make_untranslated(pairs, "src_to_tgt")
    if category is NoiseCategory.UNTRANSLATED_TGT:
        return make_untranslated(pairs, "tgt_to_src")
    side = "src" if category is NoiseCategory.OVERTRANSLATION else "tgt"
    if category in (NoiseCategory.OVERTRANSLATION, NoiseCategory.UNDERTRANSLATION):
        return make_truncated(pairs, side, truncate_range, seed)[0]
    raise BitextError(f"cannot corrupt into {category.value!r}")


@dataclass
class Benchmark:
    pairs: list[SentencePair]
    labels: dict[int, NoiseCategory]
    origin: dict[int, int]
    meta: dict = field(default_factory=dict)

    def write(self, corpus_path, labels_path) -> None:
        from .corpus import write_corpus

        write_corpus(self.pairs, corpus_path, "jsonl")
        with open(labels_path, "w", encoding="utf-8", newline="\n") as fh:
            fh.writelines(f"{pid}\t{self.labels[pid].value}\n" for pid in sorted(self.labels))


def read_labels(path) -> dict[int, NoiseCategory]:
    labels: dict[int, NoiseCategory] = {}
    with open(path, encoding="utf-8") as fh:
        for i, line in enumerate(fh):
            parts = line.rstrip("\n").split("\t")
            try:
                pid, cat = int(parts[0]), NoiseCategory(parts[1])
                if len(parts) != 2:
                    raise ValueError
            except (ValueError, IndexError):
                raise BitextError(f"{path}:{i}: expected 'id<TAB>category'") from None
            if pid in labels:
                raise BitextError(f"{path}:{i}: duplicate id {pid}")
            labels[pid] = cat
    return labels


def build_noise_benchmark(
    corpus: Iterable[SentencePair],
    category: NoiseCategory | str,
    n_clean: int,
    n_noise: int,
    seed: int,
    donors: Sequence[SentencePair] | None = None,
    truncate_range: tuple[float, float] = DEFAULT_TRUNCATE_RANGE,
) -> Benchmark:
    """Mix ``n_clean`` untouched pairs with ``n_noise`` corrupted ones.

    Clean and corruption sources are disjoint draws from one seeded sample.
    The mix is shuffled and renumbered ``0..N-1`` so ids carry no label
    information.
    """
    category = NoiseCategory(category)
    if category is NoiseCategory.CLEAN:
        raise BitextError("clean is not a noise category")
    if category is NoiseCategory.WRONG_LANGUAGE and not donors:
        raise BitextError("wrong_language needs a non-empty donor corpus")
    if category is NoiseCategory.MISALIGNED and n_noise < 2:
        raise BitextError("misaligned noise needs at least 2 pairs")
    rng = random.Random(f"{seed}/{category.value}/mix")
    total = n_clean + n_noise
    pool = sample_clean(corpus, total, rng.getrandbits(64))
    rng.shuffle(pool)
    noise_src, clean = [], []
    for p in pool:
        if len(noise_src) < n_noise and _eligible(category, p):
            noise_src.append(p)
        else:
            clean.append(p)
    if len(noise_src) < n_noise:
        raise BitextError(f"only {len(noise_src)} sampled pairs are eligible for {category.value}, need {n_noise}")
    noise_src.sort(key=lambda p: p.id)
    noisy = corrupt(category, noise_src, rng.getrandbits(64), donors, truncate_range)
    mixed = [LabeledPair(p, NoiseCategory.CLEAN, p.id) for p in clean] + noisy
    rng.shuffle(mixed)
    pairs, labels, origin = [], {}, {}
    for new_id, lp in enumerate(mixed):
        pairs.append(replace(lp.pair, id=new_id))
        labels[new_id] = lp.label
        origin[new_id] = lp.origin_id
    meta = {
        "category": category.value,
        "seed": seed,
        "n_clean": n_clean,
        "n_noise": n_noise,
        "clean_noise_ratio": f"{n_clean}:{n_noise}",
        "truncate_range": list(truncate_range),
    }
    return Benchmark(pairs, labels, origin, meta)
