"""Synthetic toy bitext used by the tests and the CLI smoke runs.

Two artificial languages, ``xa`` and ``xb``, are built from disjoint letter
sets so their token sets and character trigrams never overlap.  ``xb``
sentences are word-by-word translations of ``xa`` with occasional local
swaps and particles.  The donor corpus pairs ``xa`` with ``xc``, written in
Cyrillic letters, for wrong-language noise.

Pair ``i`` depends only on ``(seed, i)``, so a longer corpus extends a
shorter one with the same seed.
"""

from __future__ import annotations

import random
from importlib import resources
from pathlib import Path

from .corpus import SentencePair, read_corpus, write_corpus

TOY_SIZE = 1000
DONOR_SIZE = 300
SEED = 20240601

_ALPHABETS = {
    "xa": ("bdkt", "ai"),
    "xb": ("nrsz", "ou"),
    "xc": ("бджл", "ао"),
}
_VOCAB = 240


def _lexicon(lang: str, seed: int) -> list[str]:
    consonants, vowels = _ALPHABETS[lang]
    rng = random.Random(f"{seed}/lexicon/{lang}")
    words: list[str] = []
    seen = set()
    while len(words) < _VOCAB:
        n_syll = rng.choice((1, 2, 2, 3))
        w = "".join(rng.choice(consonants) + rng.choice(vowels) for _ in range(n_syll))
        if rng.random() < 0.3:
            w += rng.choice(consonants)
        if w not in seen:
            seen.add(w)
            words.append(w)
    return words


def _zipf_index(rng: random.Random) -> int:
    # rank r drawn with weight 1/(r+1)
    while True:
        r = int(_VOCAB ** rng.random()) - 1
        if 0 <= r < _VOCAB:
            return r


def _sentence(rng: random.Random) -> list[int]:
    return [_zipf_index(rng) for _ in range(rng.randint(6, 24))]


def _translate(words: list[int], lex: list[str], rng: random.Random, particle: str) -> str:
    out = [lex[w] for w in words]
    for i in range(len(out) - 1):
        if rng.random() < 0.15:
            out[i], out[i + 1] = out[i + 1], out[i]
    if rng.random() < 0.3:
        out.insert(rng.randrange(len(out) + 1), particle)
    return " ".join(out)


def make_pairs(n: int, tgt_lang: str = "xb", seed: int = SEED, provenance: str = "toy") -> list[SentencePair]:
    src_lex = _lexicon("xa", seed)
    tgt_lex = _lexicon(tgt_lang, seed)
    particle = tgt_lex[-1]
    pairs = []
    for i in range(n):
        rng = random.Random(f"{seed}/{tgt_lang}/{i}")
        words = _sentence(rng)
        src = " ".join(src_lex[w] for w in words)
        pairs.append(SentencePair(i, src, _translate(words, tgt_lex, rng, particle), "xa", tgt_lang, provenance))
    return pairs


def toy_corpus(n: int = TOY_SIZE) -> list[SentencePair]:
    """The xa-xb toy bitext; the first 1,000 pairs are the bundled file."""
    return make_pairs(n, "xb")


def toy_donors(n: int = DONOR_SIZE) -> list[SentencePair]:
    return make_pairs(n, "xc", provenance="toy-donor")


def bundled_path(name: str) -> Path:
    return Path(str(resources.files("bitextfilter") / "data" / name))


def load_bundled_corpus() -> list[SentencePair]:
    return list(read_corpus(bundled_path("toy.jsonl")))


def load_bundled_donors() -> list[SentencePair]:
    return list(read_corpus(bundled_path("toy_donor.jsonl")))


def write_bundled(out_dir: str | Path) -> list[Path]:
    """Regenerate the bundled data files into *out_dir*."""
    from .scorers import build_lang_profile

    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    corpus, donors = toy_corpus(), toy_donors()
    paths = [out_dir / "toy.jsonl", out_dir / "toy_donor.jsonl"]
    write_corpus(corpus, paths[0], "jsonl")
    write_corpus(donors, paths[1], "jsonl")
    for lang, texts in (
        ("xa", [p.src for p in corpus]),
        ("xb", [p.tgt for p in corpus]),
        ("xc", [p.tgt for p in donors]),
    ):
        path = out_dir / f"profile_{lang}.json"
        build_lang_profile(texts, lang).save(path)
        paths.append(path)
    return paths
