"""Sentence-pair records and streaming corpus I/O (JSONL and TSV)."""

from __future__ import annotations

import json
import os
from collections.abc import Iterable, Iterator
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from itertools import islice, pairwise
from pathlib import Path

import numpy as np

from . import kernels
from .errors import CorpusFormatError, CorpusWriteError

FORMATS = ("jsonl", "tsv")
_BATCH = 4096


@dataclass(frozen=True, slots=True)
class SentencePair:
    id: int
    src: str
    tgt: str
    src_lang: str = ""
    tgt_lang: str = ""
    provenance: str | None = None

    def to_json(self) -> dict:
        obj = {"id": self.id, "src": self.src, "tgt": self.tgt}
        if self.src_lang:
            obj["src_lang"] = self.src_lang
        if self.tgt_lang:
            obj["tgt_lang"] = self.tgt_lang
        if self.provenance is not None:
            obj["provenance"] = self.provenance
        return obj


@dataclass(frozen=True, slots=True)
class ScoreRecord:
    pair_id: int
    scorer_id: str
    score: float


@dataclass(frozen=True, slots=True)
class FilterDecision:
    pair_id: int
    keep: bool
    scorer_id: str
    threshold: float


def guess_format(path: str | os.PathLike) -> str:
    return "tsv" if str(path).endswith(".tsv") else "jsonl"


def tokenize(text: str) -> list[str]:
    """Split on runs of Unicode whitespace. Unsegmented scripts stay one token."""
    return text.split()


def _check_text(value, name: str, line: int, offset: int) -> str:
    if not isinstance(value, str):
        raise CorpusFormatError(f"field {name!r} must be a string", line, offset)
    if "\n" in value or "\r" in value:
        raise CorpusFormatError(f"field {name!r} contains a raw newline", line, offset)
    return value


def _parse_jsonl(raw: bytes, line: int, offset: int, src_lang: str, tgt_lang: str):
    try:
        obj = json.loads(raw)
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise CorpusFormatError(f"invalid JSON ({exc})", line, offset) from None
    if not isinstance(obj, dict):
        raise CorpusFormatError("expected a JSON object", line, offset)
    for name in ("src", "tgt"):
        if name not in obj:
            raise CorpusFormatError(f"missing field {name!r}", line, offset)
    pid = obj.get("id")
    if pid is not None and (isinstance(pid, bool) or not isinstance(pid, int) or pid < 0):
        raise CorpusFormatError("field 'id' must be a non-negative integer", line, offset)
    prov = obj.get("provenance")
    if prov is not None and not isinstance(prov, str):
        raise CorpusFormatError("field 'provenance' must be a string", line, offset)
    return pid, SentencePair(
        id=line if pid is None else pid,
        src=_check_text(obj["src"], "src", line, offset),
        tgt=_check_text(obj["tgt"], "tgt", line, offset),
        src_lang=obj.get("src_lang") or src_lang,
        tgt_lang=obj.get("tgt_lang") or tgt_lang,
        provenance=prov,
    )


def _parse_tsv(raw: bytes, line: int, offset: int, src_lang: str, tgt_lang: str):
    try:
        text = raw.decode("utf-8")
    except UnicodeDecodeError as exc:
        raise CorpusFormatError(f"invalid UTF-8 ({exc})", line, offset) from None
    fields = text.split("\t")
    if len(fields) != 2:
        raise CorpusFormatError(f"expected 2 tab-separated fields, got {len(fields)}", line, offset)
    if "\r" in text:
        raise CorpusFormatError("raw carriage return in TSV line", line, offset)
    return None, SentencePair(line, fields[0], fields[1], src_lang, tgt_lang)


def _iter_lines(fh, start_line: int, start_offset: int, end: int | None):
    line, offset = start_line, start_offset
    while end is None or offset < end:
        raw = fh.readline()
        if not raw:
            return
        yield line, offset, raw[:-1] if raw.endswith(b"\n") else raw
        line += 1
        offset += len(raw)


def _read(path, fmt, src_lang, tgt_lang, start=0, end=None, first_line=0) -> Iterator[SentencePair]:
    if fmt not in FORMATS:
        raise ValueError(f"unknown corpus format {fmt!r}")
    parse = _parse_jsonl if fmt == "jsonl" else _parse_tsv
    explicit: bool | None = None
    seen: set[int] = set()
    with open(path, "rb") as fh:
        fh.seek(start)
        for line, offset, raw in _iter_lines(fh, first_line, start, end):
            pid, pair = parse(raw, line, offset, src_lang, tgt_lang)
            has_id = pid is not None
            if explicit is None:
                explicit = has_id
            elif explicit != has_id:
                raise CorpusFormatError("explicit ids must be given on every line or none", line, offset)
            if has_id:
                if pid in seen:
                    raise CorpusFormatError(f"duplicate id {pid}", line, offset)
                seen.add(pid)
            yield pair


def read_corpus(
    path: str | os.PathLike, fmt: str | None = None, *, src_lang: str = "", tgt_lang: str = ""
) -> Iterator[SentencePair]:
    """Stream sentence pairs from *path* in file order.

    Pairs without an explicit ``id`` get their 0-based line index.  In JSONL
    either every line carries ``id`` or none does; mixing is rejected because
    explicit and implicit ids could collide.  ``src_lang``/``tgt_lang`` fill
    in tags the file does not provide.
    """
    return _read(path, fmt or guess_format(path), src_lang, tgt_lang)


def _encode(pair: SentencePair, fmt: str) -> bytes:
    for name in ("src", "tgt"):
        text = getattr(pair, name)
        if "\n" in text or "\r" in text:
            raise ValueError(f"pair {pair.id}: {name} contains a raw newline")
    if fmt == "tsv":
        if "\t" in pair.src or "\t" in pair.tgt:
            raise ValueError(f"pair {pair.id}: tab inside a field cannot be written as TSV")
        return f"{pair.src}\t{pair.tgt}\n".encode()
    return (json.dumps(pair.to_json(), ensure_ascii=False, separators=(",", ":")) + "\n").encode("utf-8")


def write_corpus(pairs: Iterable[SentencePair], path: str | os.PathLike, fmt: str | None = None) -> int:
    """Write *pairs* and return how many were written.

    TSV keeps only the two texts, so ids, language tags and provenance do
    not survive a TSV round trip unless they are the defaults.
    """
    fmt = fmt or guess_format(path)
    if fmt not in FORMATS:
        raise ValueError(f"unknown corpus format {fmt!r}")
    count = written = 0
    try:
        with open(path, "wb") as fh:
            for pair in pairs:
                data = _encode(pair, fmt)
                fh.write(data)
                written += len(data)
                count += 1
    except OSError as exc:
        raise CorpusWriteError(f"writing {path} failed: {exc.strerror or exc}", written) from exc
    return count


def batched(iterable, n: int = _BATCH):
    it = iter(iterable)
    while batch := list(islice(it, n)):
        yield batch


def _lengths(texts: list[str], count_chars: bool):
    return kernels.char_counts(texts) if count_chars else kernels.token_counts(texts)


class LengthFilter:
    """Iterator over pairs whose sides both fit in ``max_tokens``.

    ``dropped`` and ``kept`` are final once the iterator is exhausted.
    """

    def __init__(self, pairs: Iterable[SentencePair], max_tokens: int, count_chars: bool = False):
        if max_tokens < 1:
            raise ValueError("max_tokens must be >= 1")
        self._pairs = pairs
        self.max_tokens = max_tokens
        self.count_chars = count_chars
        self.kept = 0
        self.dropped = 0

    def __iter__(self) -> Iterator[SentencePair]:
        for batch in batched(self._pairs):
            src = _lengths([p.src for p in batch], self.count_chars)
            tgt = _lengths([p.tgt for p in batch], self.count_chars)
            ok = (src <= self.max_tokens) & (tgt <= self.max_tokens)
            for pair, keep in zip(batch, ok.tolist()):
                if keep:
                    self.kept += 1
                    yield pair
                else:
                    self.dropped += 1


def length_filter(pairs: Iterable[SentencePair], max_tokens: int, count_chars: bool = False) -> LengthFilter:
    return LengthFilter(pairs, max_tokens, count_chars)


@dataclass
class CorpusStats:
    """Exact length statistics.

    Totals are kept as integers so shard results merge without rounding;
    means are derived.  One histogram per side, each summing to ``n_pairs``.
    """

    n_pairs: int = 0
    src_tokens: int = 0
    tgt_tokens: int = 0
    src_histogram: dict[int, int] = field(default_factory=dict)
    tgt_histogram: dict[int, int] = field(default_factory=dict)

    @property
    def mean_src_tokens(self) -> float:
        return self.src_tokens / self.n_pairs if self.n_pairs else 0.0

    @property
    def mean_tgt_tokens(self) -> float:
        return self.tgt_tokens / self.n_pairs if self.n_pairs else 0.0

    def merge(self, other: CorpusStats) -> CorpusStats:
        out = CorpusStats(
            self.n_pairs + other.n_pairs,
            self.src_tokens + other.src_tokens,
            self.tgt_tokens + other.tgt_tokens,
            dict(self.src_histogram),
            dict(self.tgt_histogram),
        )
        for mine, theirs in ((out.src_histogram, other.src_histogram), (out.tgt_histogram, other.tgt_histogram)):
            for length, count in theirs.items():
                mine[length] = mine.get(length, 0) + count
        return out

    def to_dict(self) -> dict:
        return {
            "n_pairs": self.n_pairs,
            "mean_src_tokens": self.mean_src_tokens,
            "mean_tgt_tokens": self.mean_tgt_tokens,
            "src_tokens": self.src_tokens,
            "tgt_tokens": self.tgt_tokens,
            "src_histogram": {str(k): v for k, v in sorted(self.src_histogram.items())},
            "tgt_histogram": {str(k): v for k, v in sorted(self.tgt_histogram.items())},
        }


def _add_counts(hist: dict[int, int], counts: np.ndarray) -> None:
    values, freq = np.unique(counts, return_counts=True)
    for length, count in zip(values.tolist(), freq.tolist()):
        hist[length] = hist.get(length, 0) + count


def compute_stats(pairs: Iterable[SentencePair], count_chars: bool = False) -> CorpusStats:
    stats = CorpusStats()
    for batch in batched(pairs):
        src = _lengths([p.src for p in batch], count_chars)
        tgt = _lengths([p.tgt for p in batch], count_chars)
        stats.n_pairs += len(batch)
        stats.src_tokens += int(src.sum())
        stats.tgt_tokens += int(tgt.sum())
        _add_counts(stats.src_histogram, src)
        _add_counts(stats.tgt_histogram, tgt)
    return stats


# -- sharded reading -------------------------------------------------------


def shard_ranges(path: str | os.PathLike, n_shards: int) -> list[tuple[int, int]]:
    """Split *path* into at most ``n_shards`` byte ranges that start on line boundaries."""
    size = Path(path).stat().st_size
    if size == 0 or n_shards <= 1:
        return [(0, size)]
    cuts = [0]
    with open(path, "rb") as fh:
        for i in range(1, n_shards):
            target = size * i // n_shards
            if target <= cuts[-1]:
                continue
            fh.seek(target - 1)
            fh.readline()  # finish the line containing target-1
            pos = fh.tell()
            if cuts[-1] < pos < size:
                cuts.append(pos)
    cuts.append(size)
    return list(pairwise(cuts))


def _count_lines(path, start: int, end: int) -> int:
    n = 0
    with open(path, "rb") as fh:
        fh.seek(start)
        remaining = end - start
        while remaining > 0:
            chunk = fh.read(min(1 << 20, remaining))
            if not chunk:
                break
            n += chunk.count(b"\n")
            remaining -= len(chunk)
        if end > start:
            fh.seek(end - 1)
            if fh.read(1) != b"\n":
                n += 1  # unterminated final line
    return n


def read_shards(
    path: str | os.PathLike, fmt: str | None = None, n_shards: int = 1, *, src_lang: str = "", tgt_lang: str = ""
) -> list[Iterator[SentencePair]]:
    """Independent readers over byte-range shards, in file order.

    Implicit ids stay equal to the global line index.  Duplicate explicit ids
    are only detected within a shard.
    """
    fmt = fmt or guess_format(path)
    ranges = shard_ranges(path, n_shards)
    firsts, line = [], 0
    for start, end in ranges:
        firsts.append(line)
        line += _count_lines(path, start, end)
    return [
        _read(path, fmt, src_lang, tgt_lang, start, end, first) for (start, end), first in zip(ranges, firsts)
    ]


def compute_stats_sharded(
    path: str | os.PathLike, fmt: str | None = None, threads: int = 1, count_chars: bool = False
) -> CorpusStats:
    shards = read_shards(path, fmt, max(threads, 1))
    with ThreadPoolExecutor(max_workers=max(threads, 1)) as pool:
        parts = list(pool.map(lambda s: compute_stats(s, count_chars), shards))
    total = CorpusStats()
    for part in parts:
        total = total.merge(part)
    return total
