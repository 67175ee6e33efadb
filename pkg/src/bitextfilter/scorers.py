"""Quality scorers for sentence pairs.

Every scorer maps a :class:`SentencePair` to a float where larger means
better.  Neural QE or Bicleaner scores enter through :func:`score_external`;
the built-ins are cheap deterministic heuristics plus an oracle for tests.
Raw scores are only ever compared within one scorer.
"""

from __future__ import annotations

import json
import math
import os
import unicodedata
from collections import Counter, deque
from collections.abc import Callable, Iterable, Iterator, Mapping
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

from .corpus import ScoreRecord, SentencePair, batched, tokenize
from .errors import BitextError, CoverageError, ScoreFileError

Scorer = Callable[[SentencePair], float]

KINDS = ("external_file", "length_ratio", "copy_penalty", "lang_fingerprint", "composite", "oracle")


# -- external scores ---------------------------------------------------------


def parse_score(text: str, where: str) -> float:
    text = text.strip()
    try:
        if "_" in text:
            raise ValueError
        value = float(text)
    except ValueError:
        raise ScoreFileError(f"{where}: cannot parse score {text!r}") from None
    if not math.isfinite(value):
        raise ScoreFileError(f"{where}: non-finite score {text!r}")
    return value + 0.0  # -0.0 -> 0.0


def _read_score_lines(path) -> list[str]:
    with open(path, encoding="utf-8") as fh:
        lines = fh.read().split("\n")
    if lines and lines[-1] == "":
        lines.pop()
    return lines


def read_keyed_scores(path: str | os.PathLike) -> dict[int, float]:
    """Read an ``id<TAB>score`` file into a dict."""
    out: dict[int, float] = {}
    for i, line in enumerate(_read_score_lines(path)):
        fields = line.split("\t")
        if len(fields) != 2:
            raise ScoreFileError(f"{path}:{i}: expected 'id<TAB>score'")
        try:
            pid = int(fields[0])
        except ValueError:
            raise ScoreFileError(f"{path}:{i}: bad id {fields[0]!r}") from None
        if pid in out:
            raise ScoreFileError(f"{path}:{i}: duplicate id {pid}")
        out[pid] = parse_score(fields[1], f"{path}:{i}")
    return out


def score_external(pairs: Iterable[SentencePair], score_path: str | os.PathLike, scorer_id: str) -> Iterator[ScoreRecord]:
    """Join an externally produced score file onto *pairs*.

    Files with tabs are keyed (``id<TAB>score``); otherwise line *i* scores
    the *i*-th pair.  Keyed ids absent from the corpus are ignored.
    """
    lines = _read_score_lines(score_path)
    if any("\t" in line for line in lines):
        table = read_keyed_scores(score_path)
        for pair in pairs:
            if pair.id not in table:
                raise CoverageError(f"{score_path}: no score for id {pair.id}", [pair.id])
            yield ScoreRecord(pair.id, scorer_id, table[pair.id])
        return
    pairs = list(pairs)
    if len(lines) != len(pairs):
        raise ScoreFileError(f"{score_path}: count mismatch {len(lines)}≠{len(pairs)}")
    for i, (pair, line) in enumerate(zip(pairs, lines)):
        yield ScoreRecord(pair.id, scorer_id, parse_score(line, f"{score_path}:{i}"))


def write_scores(records: Iterable[ScoreRecord], path: str | os.PathLike) -> int:
    n = 0
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for rec in records:
            fh.write(f"{rec.pair_id}\t{rec.score!r}\n")
            n += 1
    return n


# -- heuristics ---------------------------------------------------------------


def score_length_ratio(pair: SentencePair) -> float:
    m, n = len(tokenize(pair.src)), len(tokenize(pair.tgt))
    if m == n == 0:
        return 1.0
    return min(m, n) / max(m, n)


def score_copy_penalty(pair: SentencePair) -> float:
    """1 minus the Jaccard similarity of the two token sets."""
    a, b = set(tokenize(pair.src)), set(tokenize(pair.tgt))
    union = a | b
    if not union:
        return 0.0  # two empty sides are identical
    return 1.0 - len(a & b) / len(union)


@dataclass(frozen=True)
class LangProfile:
    lang: str
    trigrams: dict[str, float] = field(hash=False)

    def to_json(self) -> dict:
        return {"lang": self.lang, "trigrams": dict(sorted(self.trigrams.items()))}

    def save(self, path: str | os.PathLike) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(self.to_json(), fh, ensure_ascii=False, sort_keys=True)
            fh.write("\n")

    @classmethod
    def load(cls, path: str | os.PathLike) -> LangProfile:
        with open(path, encoding="utf-8") as fh:
            obj = json.load(fh)
        if not isinstance(obj, dict) or "lang" not in obj or "trigrams" not in obj:
            raise BitextError(f"{path}: not a profile file")
        return cls(obj["lang"], {k: float(v) for k, v in obj["trigrams"].items()})


def trigram_counts(text: str) -> Counter:
    s = "^" + unicodedata.normalize("NFC", text).lower() + "$"
    return Counter(s[i : i + 3] for i in range(len(s) - 2))


def _l2(counts: Mapping[str, float]) -> float:
    return math.sqrt(math.fsum(v * v for v in counts.values()))


def build_lang_profile(texts: Iterable[str], lang: str) -> LangProfile:
    """Character-trigram profile with ``^``/``$`` padding, unit L2 norm."""
    total: Counter = Counter()
    for text in texts:
        if text:
            total.update(trigram_counts(text))
    norm = _l2(total)
    if norm == 0:
        raise BitextError(f"cannot build a profile for {lang!r} from empty texts")
    return LangProfile(lang, {g: c / norm for g, c in total.items()})


def _cosine(text: str, profile: LangProfile) -> float:
    counts = trigram_counts(text)
    norm = _l2(counts)
    if norm == 0:
        return 0.0
    weights = profile.trigrams
    dot = math.fsum(c * weights.get(g, 0.0) for g, c in sorted(counts.items()))
    return min(1.0, max(0.0, dot / norm))


def score_lang_fingerprint(
    pair: SentencePair,
    profiles: Mapping[str, LangProfile],
    src_lang: str | None = None,
    tgt_lang: str | None = None,
) -> float:
    """Worse of the two sides' cosine similarity to their expected profiles.

    The expected languages default to the pair's own tags.  Pass them
    explicitly when screening for wrong-language noise, since a corrupted
    pair may carry the donor's tag.
    """
    src_lang = src_lang or pair.src_lang
    tgt_lang = tgt_lang or pair.tgt_lang
    for lang in (src_lang, tgt_lang):
        if lang not in profiles:
            raise BitextError(f"no language profile for {lang!r}")
    return min(_cosine(pair.src, profiles[src_lang]), _cosine(pair.tgt, profiles[tgt_lang]))


def score_composite(pair: SentencePair, parts: Iterable[tuple[Scorer, float]]) -> float:
    return math.fsum(weight * scorer(pair) for scorer, weight in parts)


def score_oracle(pair: SentencePair, labels: Mapping[int, str]) -> float:
    """1.0 for pairs labelled clean, 0.0 for anything else."""
    try:
        label = labels[pair.id]
    except KeyError:
        raise CoverageError("no label for id", [pair.id]) from None
    return 1.0 if label == "clean" else 0.0


# -- registry -------------------------------------------------------------------


@dataclass
class ScorerSpec:
    scorer_id: str
    kind: str
    params: dict = field(default_factory=dict)


def _component(part: dict, idx: int) -> tuple[Scorer, float]:
    weight = float(part.get("weight", 1.0))
    if not math.isfinite(weight):
        raise BitextError(f"composite part {idx}: weight must be finite")
    spec = ScorerSpec(part.get("scorer_id", f"part{idx}"), part["kind"], part.get("params", {}))
    return make_scorer(spec), weight


def make_scorer(spec: ScorerSpec) -> Scorer:
    """Build a per-pair scoring function from *spec*.

    ``external_file`` has no per-pair form; use :func:`score_external`.
    """
    kind, params = spec.kind, spec.params
    if kind == "length_ratio":
        return score_length_ratio
    if kind == "copy_penalty":
        return score_copy_penalty
    if kind == "lang_fingerprint":
        profiles = params.get("profiles")
        if profiles is None:
            profiles = [LangProfile.load(p) for p in params.get("profile_paths", [])]
        if not isinstance(profiles, Mapping):
            profiles = {p.lang: p for p in profiles}
        src, tgt = params.get("src_lang"), params.get("tgt_lang")
        return lambda pair: score_lang_fingerprint(pair, profiles, src, tgt)
    if kind == "composite":
        parts = [_component(p, i) for i, p in enumerate(params.get("parts", []))]
        if not parts or all(w == 0 for _, w in parts):
            raise BitextError("composite scorer needs at least one non-zero weight")
        return lambda pair: score_composite(pair, parts)
    if kind == "oracle":
        labels = params["labels"]
        return lambda pair: score_oracle(pair, labels)
    if kind == "external_file":
        raise BitextError("external_file scores are joined with score_external, not per pair")
    raise BitextError(f"unknown scorer kind {kind!r}; choose from {', '.join(KINDS)}")


def score_pairs(pairs: Iterable[SentencePair], scorer: Scorer, scorer_id: str, threads: int = 1) -> Iterator[ScoreRecord]:
    """Score a stream in batches; output order follows input order for any ``threads``."""

    def run(batch: list[SentencePair]) -> list[ScoreRecord]:
        return [ScoreRecord(p.id, scorer_id, float(scorer(p)) + 0.0) for p in batch]

    if threads <= 1:
        for batch in batched(pairs):
            yield from run(batch)
        return
    window: deque = deque()
    with ThreadPoolExecutor(max_workers=threads) as pool:
        for batch in batched(pairs):
            window.append(pool.submit(run, batch))
            if len(window) >= 2 * threads:
                yield from window.popleft().result()
        while window:
            yield from window.popleft().result()
