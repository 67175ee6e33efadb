import itertools
import json
import random

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from bitextfilter.corpus import (
    CorpusStats,
    SentencePair,
    compute_stats,
    compute_stats_sharded,
    length_filter,
    read_corpus,
    read_shards,
    shard_ranges,
    tokenize,
    write_corpus,
)
from bitextfilter.errors import CorpusFormatError, CorpusWriteError


def naive_stats(pairs):
    """Second, independent pass: plain Python counting."""
    src = [len(p.src.split()) for p in pairs]
    tgt = [len(p.tgt.split()) for p in pairs]
    hist_s, hist_t = {}, {}
    for n in src:
        hist_s[n] = hist_s.get(n, 0) + 1
    for n in tgt:
        hist_t[n] = hist_t.get(n, 0) + 1
    return len(pairs), sum(src), sum(tgt), hist_s, hist_t


def random_pairs(n, seed):
    rng = random.Random(seed)
    words = ["a", "bb", "ccc", "日本", "ü", "x-y"]
    return [
        SentencePair(i, " ".join(rng.choices(words, k=rng.randint(0, 12))), " ".join(rng.choices(words, k=rng.randint(0, 9))))
        for i in range(n)
    ]


class TestRead:
    def test_tsv_line(self, tmp_path):
        path = tmp_path / "c.tsv"
        path.write_text("Hello\tHallo\n", encoding="utf-8")
        assert list(read_corpus(path)) == [SentencePair(0, "Hello", "Hallo")]

    def test_empty_file(self, tmp_path):
        path = tmp_path / "c.jsonl"
        path.write_bytes(b"")
        assert list(read_corpus(path)) == []

    def test_tsv_single_field(self, tmp_path):
        path = tmp_path / "c.tsv"
        path.write_text("only one field\n", encoding="utf-8")
        with pytest.raises(CorpusFormatError) as err:
            list(read_corpus(path))
        assert err.value.line == 0 and err.value.offset == 0
        assert "line 0" in str(err.value)

    def test_error_reports_byte_offset(self, tmp_path):
        path = tmp_path / "c.jsonl"
        good = json.dumps({"src": "ä", "tgt": "b"}, ensure_ascii=False) + "\n"
        path.write_text(good + "{broken\n", encoding="utf-8")
        with pytest.raises(CorpusFormatError) as err:
            list(read_corpus(path))
        assert err.value.line == 1
        assert err.value.offset == len(good.encode("utf-8"))

    def test_duplicate_explicit_id(self, tmp_path):
        path = tmp_path / "c.jsonl"
        path.write_text('{"id": 5, "src": "a", "tgt": "b"}\n{"id": 5, "src": "c", "tgt": "d"}\n')
        with pytest.raises(CorpusFormatError, match="duplicate id 5"):
            list(read_corpus(path))

    def test_explicit_ids_override_line_index(self, tmp_path):
        path = tmp_path / "c.jsonl"
        path.write_text('{"id": 7, "src": "a", "tgt": "b", "src_lang": "en", "tgt_lang": "de"}\n')
        (pair,) = read_corpus(path)
        assert (pair.id, pair.src_lang, pair.tgt_lang) == (7, "en", "de")

    def test_mixed_ids_rejected(self, tmp_path):
        path = tmp_path / "c.jsonl"
        path.write_text('{"id": 1, "src": "a", "tgt": "b"}\n{"src": "c", "tgt": "d"}\n')
        with pytest.raises(CorpusFormatError, match="every line"):
            list(read_corpus(path))

    def test_newline_inside_json_string_rejected(self, tmp_path):
        path = tmp_path / "c.jsonl"
        path.write_text('{"src": "a\\nb", "tgt": "c"}\n')
        with pytest.raises(CorpusFormatError, match="newline"):
            list(read_corpus(path))

    def test_language_defaults_for_tsv(self, tmp_path):
        path = tmp_path / "c.tsv"
        path.write_text("a\tb\n")
        (pair,) = read_corpus(path, src_lang="en", tgt_lang="de")
        assert (pair.src_lang, pair.tgt_lang) == ("en", "de")


class TestWrite:
    def test_round_trip_three_pairs(self, tmp_path):
        pairs = [
            SentencePair(0, "a b", "c", "en", "de", "wmt"),
            SentencePair(1, "é", "ü", "en", "de"),
            SentencePair(2, "", "x", "en", "de", None),
        ]
        path = tmp_path / "c.jsonl"
        assert write_corpus(pairs, path) == 3
        assert list(read_corpus(path)) == pairs

    def test_tab_in_tsv_is_an_error(self, tmp_path):
        with pytest.raises(ValueError, match="tab"):
            write_corpus([SentencePair(0, "a\tb", "c")], tmp_path / "c.tsv")

    def test_tab_in_jsonl_is_escaped(self, tmp_path):
        path = tmp_path / "c.jsonl"
        write_corpus([SentencePair(0, "a\tb", "c")], path)
        assert "\\t" in path.read_text()
        assert next(read_corpus(path)).src == "a\tb"

    def test_io_failure_reports_bytes(self, tmp_path):
        def pairs():
            yield SentencePair(0, "a", "b")
            raise OSError(28, "No space left on device")

        with pytest.raises(CorpusWriteError) as err:
            write_corpus(pairs(), tmp_path / "c.jsonl")
        assert err.value.bytes_written == len(b'{"id":0,"src":"a","tgt":"b"}\n')

    texts = st.text(st.characters(blacklist_characters="\n\r", blacklist_categories=("Cs",)), max_size=30)

    @given(st.lists(st.tuples(texts, texts, st.sampled_from(["", "en", "de"]), st.none() | texts), max_size=20))
    @settings(max_examples=60, deadline=None)
    def test_jsonl_round_trip_property(self, tmp_path_factory, rows):
        path = tmp_path_factory.mktemp("rt") / "c.jsonl"
        pairs = [SentencePair(i, s, t, lang, lang, prov) for i, (s, t, lang, prov) in enumerate(rows)]
        write_corpus(pairs, path)
        assert list(read_corpus(path)) == pairs

    @given(st.lists(st.tuples(texts, texts), max_size=20))
    @settings(max_examples=60, deadline=None)
    def test_tsv_round_trip_property(self, tmp_path_factory, rows):
        rows = [(s.replace("\t", " "), t.replace("\t", " ")) for s, t in rows]
        path = tmp_path_factory.mktemp("rt") / "c.tsv"
        pairs = [SentencePair(i, s, t) for i, (s, t) in enumerate(rows)]
        write_corpus(pairs, path)
        assert list(read_corpus(path)) == pairs


class TestTokenize:
    def test_whitespace_collapse(self):
        assert tokenize("a  b c") == ["a", "b", "c"]

    def test_empty(self):
        assert tokenize("") == []

    def test_unsegmented_script_is_one_token(self):
        assert tokenize("日本語のテスト") == ["日本語のテスト"]

    @given(st.text())
    def test_no_empty_tokens(self, text):
        assert all(tokenize(text))


class TestLengthFilter:
    def test_over_limit_dropped(self):
        lf = length_filter([SentencePair(0, " ".join(["w"] * 130), "x")], 128)
        assert list(lf) == [] and lf.dropped == 1

    def test_inclusive_boundary(self):
        text = " ".join(["w"] * 128)
        lf = length_filter([SentencePair(0, text, text)], 128)
        assert len(list(lf)) == 1 and lf.dropped == 0

    def test_either_side_drops(self):
        long = " ".join(["w"] * 5)
        pairs = [SentencePair(0, long, "a"), SentencePair(1, "a", long), SentencePair(2, "a", "b")]
        lf = length_filter(pairs, 4)
        assert [p.id for p in lf] == [2]

    def test_order_preserved_and_idempotent(self):
        pairs = random_pairs(500, 1)
        first = list(length_filter(pairs, 6))
        assert [p.id for p in first] == sorted(p.id for p in first)
        again = length_filter(first, 6)
        assert list(again) == first and again.dropped == 0

    def test_count_chars(self):
        lf = length_filter([SentencePair(0, "日本語のテスト", "ab"), SentencePair(1, "日本", "ab")], 3, count_chars=True)
        assert [p.id for p in lf] == [1]

    def test_rejects_zero_limit(self):
        with pytest.raises(ValueError):
            length_filter([], 0)


class TestStats:
    def test_mean(self):
        stats = compute_stats([SentencePair(0, "a b", "x"), SentencePair(1, "a b c d", "y")])
        assert stats.mean_src_tokens == 3.0

    def test_empty(self):
        stats = compute_stats([])
        assert stats.n_pairs == 0 and stats.mean_src_tokens == 0.0 and stats.mean_tgt_tokens == 0.0

    def test_matches_naive_recomputation(self):
        pairs = random_pairs(1000, 7)
        stats = compute_stats(pairs)
        n, s, t, hs, ht = naive_stats(pairs)
        assert (stats.n_pairs, stats.src_tokens, stats.tgt_tokens) == (n, s, t)
        assert stats.src_histogram == hs and stats.tgt_histogram == ht
        assert stats.mean_src_tokens == s / n

    def test_histogram_invariants(self):
        stats = compute_stats(random_pairs(300, 2))
        for hist, mean in ((stats.src_histogram, stats.mean_src_tokens), (stats.tgt_histogram, stats.mean_tgt_tokens)):
            assert sum(hist.values()) == stats.n_pairs
            assert sum(k * v for k, v in hist.items()) / stats.n_pairs == pytest.approx(mean, rel=1e-9)

    def test_merge_is_associative(self):
        pairs = random_pairs(90, 4)
        a, b, c = (compute_stats(pairs[i : i + 30]) for i in (0, 30, 60))
        assert a.merge(b).merge(c) == a.merge(b.merge(c)) == compute_stats(pairs)

    def test_to_dict_is_json(self):
        json.dumps(CorpusStats().to_dict())


class TestSharding:
    @pytest.mark.parametrize("fmt", ["jsonl", "tsv"])
    @pytest.mark.parametrize("n_shards", [1, 2, 3, 8, 50])
    def test_sharded_read_equals_sequential(self, tmp_path, fmt, n_shards):
        pairs = random_pairs(200, 5)
        path = tmp_path / f"c.{fmt}"
        write_corpus(pairs, path)
        shards = read_shards(path, fmt, n_shards)
        assert [p for s in shards for p in s] == list(read_corpus(path))

    def test_ranges_cover_file(self, tmp_path):
        path = tmp_path / "c.jsonl"
        write_corpus(random_pairs(100, 6), path)
        ranges = shard_ranges(path, 7)
        assert ranges[0][0] == 0 and ranges[-1][1] == path.stat().st_size
        assert all(a[1] == b[0] for a, b in itertools.pairwise(ranges))

    def test_unterminated_last_line(self, tmp_path):
        path = tmp_path / "c.tsv"
        path.write_text("a\tb\nc\td\ne\tf")
        shards = read_shards(path, "tsv", 3)
        assert [p.id for s in shards for p in s] == [0, 1, 2]

    @pytest.mark.parametrize("threads", [2, 8])
    def test_streaming_parity(self, tmp_path, threads):
        pairs = random_pairs(2000, 8)
        path = tmp_path / "c.jsonl"
        write_corpus(pairs, path)
        seq = compute_stats(read_corpus(path))
        par = compute_stats_sharded(path, "jsonl", threads)
        assert (par.n_pairs, par.src_tokens, par.tgt_tokens) == (seq.n_pairs, seq.src_tokens, seq.tgt_tokens)
        assert par.src_histogram == seq.src_histogram and par.tgt_histogram == seq.tgt_histogram
        assert par.mean_src_tokens == pytest.approx(seq.mean_src_tokens, rel=1e-12)
