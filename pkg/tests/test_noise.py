import itertools
import math
import random
from collections import Counter

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from bitextfilter.corpus import SentencePair, tokenize
from bitextfilter.errors import BitextError
from bitextfilter.noise import (
    NOISE_CATEGORIES,
    NoiseCategory,
    NoiseSpec,
    build_noise_benchmark,
    derangement,
    make_misaligned,
    make_misordered,
    make_truncated,
    make_untranslated,
    make_wrong_language,
    read_labels,
    sample_clean,
    truncated_length,
)
from bitextfilter.scorers import score_copy_penalty


def pairs_of(n):
    return [SentencePair(i, f"s{i} a", f"t{i} b", "en", "de") for i in range(n)]


class TestSampleClean:
    def test_whole_corpus(self):
        pairs = pairs_of(20)
        assert sample_clean(reversed(pairs), 20, 3) == pairs

    def test_deterministic(self):
        assert sample_clean(pairs_of(500), 50, 9) == sample_clean(pairs_of(500), 50, 9)

    def test_too_small(self):
        with pytest.raises(BitextError, match="10 pairs"):
            sample_clean(pairs_of(10), 11, 0)

    def test_monte_carlo_uniformity(self):
        pairs = pairs_of(10_000)
        counts = np.zeros(10_000)
        for seed in range(200):
            for p in sample_clean(pairs, 100, seed):
                counts[p.id] += 1
        freq = counts / 200
        assert freq.sum() == pytest.approx(100)
        # blocks of 100 consecutive ids: mean selection frequency within 1% +/- 0.5%
        blocks = freq.reshape(100, 100).mean(axis=1)
        assert np.all(np.abs(blocks - 0.01) <= 0.005)
        assert counts.var() == pytest.approx(200 * 0.01 * 0.99, rel=0.1)


class TestMisaligned:
    def test_two_pairs_swap(self):
        out = make_misaligned(pairs_of(2), 5)
        assert [lp.pair.tgt for lp in out] == ["t1 b", "t0 b"]

    def test_three_pairs_only_derangements(self):
        derangements = {p for p in itertools.permutations(range(3)) if all(i != j for i, j in enumerate(p))}
        assert len(derangements) == 2
        seen = set()
        pairs = pairs_of(3)
        for seed in range(300):
            out = make_misaligned(pairs, seed)
            seen.add(tuple(int(lp.pair.tgt.split()[0][1:]) for lp in out))
        assert seen == derangements

    def test_multiset_and_sources(self):
        pairs = pairs_of(50)
        out = make_misaligned(pairs, 1)
        assert Counter(lp.pair.tgt for lp in out) == Counter(p.tgt for p in pairs)
        assert [lp.pair.src for lp in out] == [p.src for p in pairs]
        assert all(lp.label is NoiseCategory.MISALIGNED for lp in out)

    def test_needs_two(self):
        with pytest.raises(BitextError):
            make_misaligned(pairs_of(1), 0)

    def test_derangement_is_uniform(self):
        # n=4 has 9 derangements
        rng = random.Random(0)
        counts = Counter(tuple(derangement(4, rng)) for _ in range(9000))
        assert len(counts) == 9
        assert all(abs(c - 1000) < 150 for c in counts.values())


class TestMisordered:
    def test_two_tokens(self):
        (lp,) = make_misordered([SentencePair(0, "a b", "x")], "src", 0)
        assert lp.pair.src == "b a"

    def test_single_token_passes(self):
        (lp,) = make_misordered([SentencePair(0, "x", "y z")], "src", 0)
        assert lp.pair.src == "x" and lp.label is NoiseCategory.MISORDERED_SRC

    @given(st.lists(st.sampled_from(["a", "b", "c", "d"]), max_size=10), st.integers(0, 1000))
    def test_multiset_preserved(self, tokens, seed):
        pair = SentencePair(0, "keep", " ".join(tokens))
        (lp,) = make_misordered([pair], "tgt", seed)
        assert Counter(tokenize(lp.pair.tgt)) == Counter(tokens)
        assert lp.pair.src == "keep"
        if len(set(tokens)) >= 2:
            assert tokenize(lp.pair.tgt) != tokens

    def test_bad_side(self):
        with pytest.raises(BitextError):
            make_misordered(pairs_of(2), "both", 0)


class TestWrongLanguage:
    def donors(self):
        return [SentencePair(i, f"d{i}", f"bonjour {i}", "en", "fr") for i in range(5)]

    def test_construction(self):
        out = make_wrong_language(pairs_of(10), self.donors(), 4)
        assert all(lp.pair.tgt_lang == "fr" and lp.pair.tgt.startswith("bonjour") for lp in out)
        assert [lp.pair.src for lp in out] == [p.src for p in pairs_of(10)]

    def test_deterministic(self):
        a = make_wrong_language(pairs_of(10), self.donors(), 4)
        assert a == make_wrong_language(pairs_of(10), self.donors(), 4)

    def test_empty_donors(self):
        with pytest.raises(BitextError, match="empty"):
            make_wrong_language(pairs_of(2), [], 0)

    def test_same_language_donor(self):
        with pytest.raises(BitextError, match="equals"):
            make_wrong_language(pairs_of(2), [SentencePair(0, "a", "b", "en", "de")], 0)


class TestUntranslated:
    def test_src_to_tgt(self):
        (lp,) = make_untranslated([SentencePair(0, "Hello", "Hallo")], "src_to_tgt")
        assert (lp.pair.src, lp.pair.tgt, lp.label) == ("Hello", "Hello", NoiseCategory.UNTRANSLATED_SRC)

    def test_tgt_to_src(self):
        (lp,) = make_untranslated([SentencePair(0, "Hello", "Hallo")], "tgt_to_src")
        assert (lp.pair.src, lp.pair.tgt, lp.label) == ("Hallo", "Hallo", NoiseCategory.UNTRANSLATED_TGT)

    def test_copy_penalty_zero(self, toy):
        for direction in ("src_to_tgt", "tgt_to_src"):
            assert all(score_copy_penalty(lp.pair) == 0.0 for lp in make_untranslated(toy, direction))


class TestTruncated:
    def test_arithmetic(self):
        assert truncated_length(10, 0.3) == 7
        assert truncated_length(10, 0.25) == 8  # ceil(7.5)

    def test_two_tokens_keep_one(self):
        for seed in range(20):
            (lp,), _ = make_truncated([SentencePair(0, "a", "x y")], "tgt", (0.2, 0.5), seed)
            assert lp.pair.tgt == "x"

    def test_labels(self):
        (over,), _ = make_truncated([SentencePair(0, "a b c", "x")], "src", seed=0)
        (under,), _ = make_truncated([SentencePair(0, "a", "x y z")], "tgt", seed=0)
        assert over.label is NoiseCategory.OVERTRANSLATION
        assert under.label is NoiseCategory.UNDERTRANSLATION

    def test_short_sides_skipped(self, caplog):
        out, skipped = make_truncated([SentencePair(0, "a", "x"), SentencePair(1, "", "x")], "src", seed=0)
        assert out == [] and skipped == 2
        assert "skipped 2" in caplog.text

    @given(st.integers(2, 200), st.floats(0.01, 0.98), st.integers(0, 10**6))
    def test_strict_prefix(self, n, low, seed):
        high = min(0.99, low + 0.01)
        tokens = [f"w{i}" for i in range(n)]
        (lp,), _ = make_truncated([SentencePair(0, "s", " ".join(tokens))], "tgt", (low, high), seed)
        out = tokenize(lp.pair.tgt)
        assert 1 <= len(out) < n and out == tokens[: len(out)]
        lo = max(1, min(n - 1, math.ceil(n * (1 - high) - 1e-9)))
        hi = max(1, min(n - 1, math.ceil(n * (1 - low) - 1e-9)))
        assert lo <= len(out) <= hi

    @pytest.mark.parametrize("rng_range", [(0.5, 0.5), (0.0, 0.5), (0.3, 1.0), (0.6, 0.4)])
    def test_bad_range(self, rng_range):
        with pytest.raises(BitextError):
            make_truncated(pairs_of(2), "src", rng_range, 0)


class TestNoiseSpec:
    def test_donor_iff_wrong_language(self):
        NoiseSpec("wrong_language", 10, 0, donor_path="d.jsonl")
        with pytest.raises(BitextError):
            NoiseSpec("wrong_language", 10, 0)
        with pytest.raises(BitextError):
            NoiseSpec("misaligned", 10, 0, donor_path="d.jsonl")

    def test_range(self):
        with pytest.raises(BitextError):
            NoiseSpec("undertranslation", 10, 0, truncate_range=(0.5, 0.2))


class TestBenchmark:
    @pytest.mark.parametrize("category", NOISE_CATEGORIES, ids=lambda c: c.value)
    def test_bookkeeping(self, toy, donors, category):
        bench = build_noise_benchmark(toy, category, 300, 200, seed=7, donors=donors)
        assert len(bench.pairs) == 500
        assert [p.id for p in bench.pairs] == list(range(500))
        counts = Counter(bench.labels.values())
        assert counts == {NoiseCategory.CLEAN: 300, category: 200}
        clean_origins = {bench.origin[i] for i, c in bench.labels.items() if c is NoiseCategory.CLEAN}
        noise_origins = {bench.origin[i] for i, c in bench.labels.items() if c is not NoiseCategory.CLEAN}
        assert not clean_origins & noise_origins

    @pytest.mark.parametrize("category", NOISE_CATEGORIES, ids=lambda c: c.value)
    def test_label_soundness(self, toy, donors, category):
        bench = build_noise_benchmark(toy, category, 100, 400, seed=1, donors=donors)
        by_id = {p.id: p for p in toy}
        for pair in bench.pairs:
            orig = by_id[bench.origin[pair.id]]
            same = (pair.src, pair.tgt) == (orig.src, orig.tgt)
            if bench.labels[pair.id] is NoiseCategory.CLEAN:
                assert same
            elif category in (NoiseCategory.MISORDERED_SRC, NoiseCategory.MISORDERED_TGT):
                side = orig.src if category is NoiseCategory.MISORDERED_SRC else orig.tgt
                assert not same or len(set(side.split())) < 2
            elif category is NoiseCategory.MISALIGNED:
                assert not same or sum(p.tgt == orig.tgt for p in toy) > 1
            else:
                assert not same

    def test_deterministic_bytes(self, toy, donors, tmp_path):
        for run in ("a", "b"):
            bench = build_noise_benchmark(toy, "wrong_language", 100, 100, 3, donors)
            bench.write(tmp_path / f"{run}.jsonl", tmp_path / f"{run}.tsv")
        assert (tmp_path / "a.jsonl").read_bytes() == (tmp_path / "b.jsonl").read_bytes()
        assert (tmp_path / "a.tsv").read_bytes() == (tmp_path / "b.tsv").read_bytes()
        labels = read_labels(tmp_path / "a.tsv")
        assert Counter(c.value for c in labels.values()) == {"clean": 100, "wrong_language": 100}

    def test_insufficient_corpus(self, toy):
        with pytest.raises(BitextError):
            build_noise_benchmark(toy, "misaligned", 600, 500, 0)

    def test_wrong_language_needs_donors(self, toy):
        with pytest.raises(BitextError):
            build_noise_benchmark(toy, "wrong_language", 10, 10, 0)

    def test_truncation_eligibility(self):
        pairs = [SentencePair(i, "one" if i % 2 else "two words", "x y") for i in range(40)]
        # the whole corpus is sampled, so exactly 20 pairs are eligible
        bench = build_noise_benchmark(pairs, "overtranslation", 20, 20, 0)
        assert sum(c is NoiseCategory.OVERTRANSLATION for c in bench.labels.values()) == 20
        with pytest.raises(BitextError, match="eligible"):
            build_noise_benchmark(pairs, "overtranslation", 19, 21, 0)
