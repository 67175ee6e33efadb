"""Command-line entry point: ``bitextfilter <command> ...``.

Exit codes: 0 success, 1 I/O failure, 2 usage or data-contract violation.
Every command that writes files also writes ``<primary output>.manifest.json``;
all other outputs are byte-identical across reruns and ``--threads`` values.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import logging
import sys
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from . import __version__, kernels
from .corpus import (
    FORMATS,
    compute_stats,
    compute_stats_sharded,
    length_filter,
    read_corpus,
)
from .errors import BitextError, CoverageError
from .evaluation import compare_filters, eval_noise, filter_report, sample_divergence
from .noise import (
    DEFAULT_TRUNCATE_RANGE,
    NOISE_CATEGORIES,
    NoiseCategory,
    build_noise_benchmark,
    read_labels,
)
from .scorers import (
    ScorerSpec,
    build_lang_profile,
    make_scorer,
    score_external,
    score_pairs,
    write_scores,
)
from .thresholding import (
    Decisions,
    ScoreTable,
    estimate_quantile,
    exact_cutoff,
    iter_score_chunks,
    keep_count,
    random_select,
)

log = logging.getLogger("bitextfilter")

SCORER_CHOICES = ("length_ratio", "copy_penalty", "lang_fingerprint", "composite", "oracle", "external")


def file_digest(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for block in iter(lambda: fh.read(1 << 20), b""):
            h.update(block)
    return "sha256:" + h.hexdigest()


def write_json(obj, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(obj, fh, indent=2, sort_keys=True, ensure_ascii=False)
        fh.write("\n")


def write_manifest(primary_out, args: argparse.Namespace, inputs, seeds=()) -> Path:
    """Record how an output was produced; the only file allowed to differ between reruns."""
    path = Path(f"{primary_out}.manifest.json")
    manifest = {
        "command": args.command,
        "args": json.loads(json.dumps({k: v for k, v in vars(args).items() if k != "func"}, default=str)),
        "inputs": {str(p): file_digest(p) for p in inputs if p is not None},
        "seeds": [s for s in seeds if s is not None],
        "tool_version": __version__,
        "kernel_backend": kernels.backend(),
        "timestamp": datetime.now(timezone.utc).isoformat(timespec="seconds"),
    }
    write_json(manifest, path)
    return path


def _read(args, path=None):
    path = path or args.corpus
    return read_corpus(path, args.format, src_lang=args.src_lang, tgt_lang=args.tgt_lang)


def _parse_params(text: str | None) -> dict:
    if not text:
        return {}
    text = text.strip()
    if text.startswith("{"):
        return json.loads(text)
    params = {}
    for item in text.split(","):
        key, sep, value = item.partition("=")
        if not sep:
            raise BitextError(f"bad --params item {item!r}; use key=value")
        params[key.strip()] = value.strip()
    return params


# -- commands --------------------------------------------------------------


def cmd_score(args) -> int:
    scorer_id = args.scorer_id or args.scorer
    inputs = [args.corpus]
    if args.scorer == "external":
        if not args.score_file:
            raise BitextError("--scorer external needs --score-file")
        inputs.append(args.score_file)
        records = score_external(_read(args), args.score_file, scorer_id)
    else:
        params = _parse_params(args.params)
        if args.profile:
            params["profile_paths"] = [str(p) for p in args.profile]
            inputs.extend(args.profile)
        if args.scorer == "oracle":
            if not args.labels:
                raise BitextError("--scorer oracle needs --labels")
            params["labels"] = {k: v.value for k, v in read_labels(args.labels).items()}
            inputs.append(args.labels)
        scorer = make_scorer(ScorerSpec(scorer_id, args.scorer, params))
        records = score_pairs(_read(args), scorer, scorer_id, args.threads)
    n = write_scores(records, args.out)
    log.info("wrote %d scores to %s", n, args.out)
    write_manifest(args.out, args, inputs)
    return 0


def _lockstep(pairs, score_path):
    """Yield (pair, score) assuming the score file follows corpus order."""
    chunks = iter_score_chunks(score_path)
    ids, scores, i = np.empty(0, np.int64), np.empty(0), 0
    for pair in pairs:
        while i >= len(ids):
            try:
                ids, scores = next(chunks)
            except StopIteration:
                raise _OutOfOrder from None
            i = 0
        if ids[i] != pair.id:
            raise _OutOfOrder
        yield pair, float(scores[i])
        i += 1
    for rest in ([ids[i:]], (c for c, _ in chunks)):
        if any(len(c) for c in rest):
            raise _OutOfOrder


class _OutOfOrder(Exception):
    pass


def _keyed(pairs, table: ScoreTable):
    lookup = dict(zip(table.ids.tolist(), table.scores.tolist()))
    for pair in pairs:
        yield pair, lookup[pair.id]


def _filter_fraction_cutoff(args, n_total: int):
    """Exact boundary from the score file, re-reading it once per narrowing pass."""
    k = keep_count(args.keep_fraction, n_total)
    if k == 0:
        return float("inf"), -1, k
    t, bid = exact_cutoff(lambda: iter_score_chunks(args.scores), k, args.max_resident)
    return t, bid, k


def cmd_filter(args) -> int:
    modes = [args.keep_fraction is not None and args.random_seed is None, args.threshold is not None,
             args.random_seed is not None, args.median]
    if sum(modes) != 1:
        raise BitextError("choose exactly one of --keep-fraction, --threshold, --random-seed (+--keep-fraction), --median")
    if args.median:
        args.keep_fraction = 0.5
    out_kept = Path(args.out_kept)
    decisions_path = Path(args.decisions or f"{out_kept}.decisions.tsv")
    meta_path = Path(args.meta or f"{out_kept}.threshold.json")

    corpus_ids = np.fromiter((p.id for p in _read(args)), dtype=np.int64)
    n_total = len(corpus_ids)
    if n_total == 0:
        raise BitextError("corpus is empty")

    inputs = [args.corpus]
    if args.random_seed is not None:
        d = random_select(n_total, args.keep_fraction, args.random_seed, corpus_ids)
        keep_of = dict(zip(d.ids.tolist(), d.keep.tolist()))
        decide = lambda pair, _s: keep_of[pair.id]
        meta = d.metadata()
        stream = ((p, None) for p in _read(args))
    else:
        if not args.scores:
            raise BitextError("--scores is required unless --random-seed is given")
        inputs.append(args.scores)
        score_ids = np.concatenate([c for c, _ in iter_score_chunks(args.scores)] or [np.empty(0, np.int64)])
        missing = np.setdiff1d(corpus_ids, score_ids)
        if len(missing):
            raise CoverageError(f"{len(missing)} pairs have no score", missing.tolist())
        extra = np.setdiff1d(score_ids, corpus_ids)
        if len(extra) or len(np.unique(score_ids)) != len(score_ids):
            raise CoverageError("score file has duplicate or unknown ids", extra.tolist())
        meta = {"scorer_id": args.scorer_id or Path(args.scores).stem, "n_total": n_total}
        if args.threshold is not None:
            t = args.threshold
            decide = lambda _p, s: s >= t
            meta.update(mode="absolute", threshold=t)
        elif args.estimate:
            chunks = (s for _, s in iter_score_chunks(args.scores))
            t = estimate_quantile(chunks, 1.0 - args.keep_fraction, args.memory_budget, n_total=n_total)
            decide = lambda _p, s: s >= t
            meta.update(mode="estimated_fraction", p=args.keep_fraction, threshold=t, eps=0.001)
        else:
            t, bid, k = _filter_fraction_cutoff(args, n_total)
            decide = lambda p, s: s > t or (s == t and p.id <= bid)
            meta.update(mode="median_split" if args.median else "keep_fraction", p=args.keep_fraction,
                        k=k, threshold=t if k else None, boundary_id=bid)

    kept_ids: list[int] = []
    keeps: list[bool] = []

    def run(pairs_scores) -> int:
        kept_ids.clear()
        keeps.clear()
        with _CorpusWriter(out_kept, args.out_format) as wk, _CorpusWriter(args.out_dropped, args.out_format) as wd:
            for pair, s in pairs_scores:
                k = bool(decide(pair, s))
                kept_ids.append(pair.id)
                keeps.append(k)
                (wk if k else wd).write(pair)
        return sum(keeps)

    if args.random_seed is not None:
        n_kept = run(stream)
    else:
        try:
            n_kept = run(_lockstep(_read(args), args.scores))
        except _OutOfOrder:
            n_kept = run(_keyed(_read(args), ScoreTable.read(args.scores)))

    decisions = Decisions(np.array(kept_ids, np.int64), np.array(keeps, bool))
    decisions.write(decisions_path)
    meta.update(n_total=n_total, n_kept=n_kept, realized_fraction=n_kept / n_total)
    write_json(dict(sorted(meta.items())), meta_path)
    log.info("kept %d of %d pairs", n_kept, n_total)
    write_manifest(out_kept, args, inputs, [args.random_seed])
    return 0


class _CorpusWriter:
    def __init__(self, path, fmt):
        from .corpus import _encode, guess_format

        self.path = Path(path)
        self.fmt = fmt or guess_format(path)
        self._encode = _encode
        self.fh = None

    def __enter__(self):
        self.fh = open(self.path, "wb")
        return self

    def write(self, pair):
        self.fh.write(self._encode(pair, self.fmt))

    def __exit__(self, *exc):
        self.fh.close()
        return False


def cmd_noise_gen(args) -> int:
    category = NoiseCategory(args.category)
    if category is NoiseCategory.WRONG_LANGUAGE and not args.donor:
        raise BitextError("--category wrong_language requires --donor")
    if category is not NoiseCategory.WRONG_LANGUAGE and args.donor:
        raise BitextError("--donor only applies to --category wrong_language")
    donors = None
    if args.donor:
        donors = list(read_corpus(args.donor, args.format, src_lang=args.src_lang, tgt_lang=args.donor_lang or ""))
    n_clean = args.n if args.n_clean is None else args.n_clean
    bench = build_noise_benchmark(
        _read(args), category, n_clean, args.n, args.seed, donors, tuple(args.truncate_range)
    )
    out = Path(args.out)
    stem = out.with_suffix("") if out.suffix else out
    labels_path = Path(args.labels or f"{stem}.labels.tsv")
    bench.write(out, labels_path)
    meta = dict(bench.meta)
    meta.update(
        source_corpus=str(args.corpus),
        source_digest=file_digest(args.corpus),
        donor_path=str(args.donor) if args.donor else None,
        donor_digest=file_digest(args.donor) if args.donor else None,
    )
    write_json(meta, f"{stem}.meta.json")
    write_manifest(out, args, [args.corpus, args.donor], [args.seed])
    return 0


def _print_or_write(text: str, path) -> None:
    if path:
        Path(path).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)


def cmd_eval_noise(args) -> int:
    labels = read_labels(args.labels)
    bench_ids = {p.id for p in read_corpus(args.benchmark, "jsonl")}
    if bench_ids != set(labels):
        diff = sorted(bench_ids ^ set(labels))
        raise CoverageError("benchmark and label file disagree on ids", diff)
    table = ScoreTable.read(args.scores, args.scorer_id or Path(args.scores).stem)
    report = eval_noise(labels, table)
    report.write(args.out_report)
    text = report.to_text()
    Path(f"{Path(args.out_report).with_suffix('')}.txt").write_text(text, encoding="utf-8")
    sys.stdout.write(text)
    write_manifest(args.out_report, args, [args.benchmark, args.labels, args.scores])
    return 0


def cmd_compare(args) -> int:
    a, b = Decisions.read(args.decisions_a), Decisions.read(args.decisions_b)
    a.scorer_id = args.label_a or Path(args.decisions_a).stem
    b.scorer_id = args.label_b or Path(args.decisions_b).stem
    report = compare_filters(a, b)
    report.write(args.out)
    sys.stdout.write(report.to_text())
    inputs = [args.decisions_a, args.decisions_b]
    if args.sample:
        if not args.corpus:
            raise BitextError("--sample needs --corpus")
        scores = {}
        for path in (args.scores_a, args.scores_b):
            if path:
                scores[Path(path).stem] = ScoreTable.read(path)
                inputs.append(path)
        only_a, only_b = sample_divergence(_read(args), a, b, args.sample, args.seed, scores)
        sample_path = Path(args.sample_out or f"{Path(args.out).with_suffix('')}.divergence.jsonl")
        with open(sample_path, "w", encoding="utf-8", newline="\n") as fh:
            fh.writelines(json.dumps(row, ensure_ascii=False, sort_keys=True) + "\n" for row in only_a + only_b)
        inputs.append(args.corpus)
    write_manifest(args.out, args, inputs, [args.seed if args.sample else None])
    return 0


def cmd_stats(args) -> int:
    if args.threads > 1:
        stats = compute_stats_sharded(args.corpus, args.format, args.threads, args.count_chars)
    else:
        stats = compute_stats(_read(args), args.count_chars)
    out = {"schema_version": 1, "report": "corpus_stats", "unit": "chars" if args.count_chars else "tokens"}
    out.update(stats.to_dict())
    if args.max_tokens is not None:
        lf = length_filter(_read(args), args.max_tokens, args.count_chars)
        kept = compute_stats(lf, args.count_chars)
        out["max_tokens"] = args.max_tokens
        out["would_drop"] = lf.dropped
        out["would_keep"] = lf.kept
        out["after_length_filter"] = filter_report(stats, kept).to_dict()
    text = json.dumps(out, indent=2, sort_keys=True) + "\n"
    _print_or_write(text, args.out)
    if args.out:
        write_manifest(args.out, args, [args.corpus])
    return 0


def cmd_report(args) -> int:
    before = compute_stats(_read(args, args.before), args.count_chars)
    after = compute_stats(_read(args, args.after), args.count_chars)
    rep = filter_report(before, after)
    sys.stdout.write(rep.to_text())
    if args.out:
        write_json(rep.to_dict(), args.out)
        write_manifest(args.out, args, [args.before, args.after])
    return 0


def cmd_profile(args) -> int:
    texts = (getattr(p, args.side) for p in _read(args))
    build_lang_profile(texts, args.lang).save(args.out)
    write_manifest(args.out, args, [args.corpus])
    return 0


def cmd_toy(args) -> int:
    from .toy import write_bundled

    for path in write_bundled(args.out_dir):
        print(path)
    return 0


# -- parser ------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--format", choices=FORMATS, help="corpus format (default: from extension)")
    common.add_argument("--src-lang", default="", help="source language tag for files without one")
    common.add_argument("--tgt-lang", default="", help="target language tag for files without one")
    common.add_argument("--threads", type=int, default=1, help="worker threads; never changes output")
    common.add_argument("-v", "--verbose", action="store_true")

    parser = argparse.ArgumentParser(prog="bitextfilter", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("score", parents=[common], help="score every pair of a corpus")
    p.add_argument("corpus", type=Path)
    p.add_argument("--scorer", required=True, choices=SCORER_CHOICES)
    p.add_argument("--scorer-id", help="name recorded with the scores (default: scorer kind)")
    p.add_argument("--params", help="scorer parameters as JSON or key=value,key=value")
    p.add_argument("--profile", type=Path, action="append", help="language profile JSON (lang_fingerprint)")
    p.add_argument("--labels", type=Path, help="label TSV (oracle)")
    p.add_argument("--score-file", type=Path, help="externally computed scores (external)")
    p.add_argument("--out", required=True, type=Path, help="keyed score TSV to write")
    p.set_defaults(func=cmd_score)

    p = sub.add_parser("filter", parents=[common], help="split a corpus into kept and dropped pairs")
    p.add_argument("corpus", type=Path)
    p.add_argument("--scores", type=Path, help="keyed score TSV from 'score'")
    p.add_argument("--scorer-id", default="", help="name recorded in the threshold metadata")
    p.add_argument("--keep-fraction", type=float, help="keep exactly round(p*N) best pairs")
    p.add_argument("--threshold", type=float, help="keep pairs with score >= threshold")
    p.add_argument("--median", action="store_true", help="keep the better half")
    p.add_argument("--random-seed", type=int, help="random selection of --keep-fraction pairs")
    p.add_argument("--estimate", action="store_true", help="one-pass approximate threshold (error <= 0.001)")
    p.add_argument("--memory-budget", type=int, default=64 << 20, help="bytes for --estimate (default 64 MiB)")
    p.add_argument("--max-resident", type=int, default=1 << 22, help="scores held in memory by exact mode")
    p.add_argument("--out-kept", required=True, type=Path)
    p.add_argument("--out-dropped", required=True, type=Path)
    p.add_argument("--out-format", choices=FORMATS)
    p.add_argument("--decisions", type=Path, help="decisions TSV (default: <out-kept>.decisions.tsv)")
    p.add_argument("--meta", type=Path, help="threshold JSON (default: <out-kept>.threshold.json)")
    p.set_defaults(func=cmd_filter)

    p = sub.add_parser("noise-gen", parents=[common], help="build a synthetic noise benchmark")
    p.add_argument("corpus", type=Path)
    p.add_argument("--category", required=True, choices=[c.value for c in NOISE_CATEGORIES])
    p.add_argument("--n", type=int, required=True, help="number of corrupted pairs")
    p.add_argument("--n-clean", type=int, help="number of clean pairs (default: same as --n)")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--donor", type=Path, help="donor corpus for wrong_language")
    p.add_argument("--donor-lang", help="target language tag of donor files without one")
    p.add_argument("--truncate-range", type=float, nargs=2, default=list(DEFAULT_TRUNCATE_RANGE), metavar=("LOW", "HIGH"))
    p.add_argument("--out", required=True, type=Path, help="benchmark JSONL")
    p.add_argument("--labels", type=Path, help="label TSV (default: <out stem>.labels.tsv)")
    p.set_defaults(func=cmd_noise_gen)

    p = sub.add_parser("eval-noise", parents=[common], help="noise kept after a median split")
    p.add_argument("benchmark", type=Path)
    p.add_argument("labels", type=Path)
    p.add_argument("scores", type=Path)
    p.add_argument("--scorer-id")
    p.add_argument("--out-report", required=True, type=Path)
    p.set_defaults(func=cmd_eval_noise)

    p = sub.add_parser("compare", parents=[common], help="overlap of two filters")
    p.add_argument("decisions_a", type=Path)
    p.add_argument("decisions_b", type=Path)
    p.add_argument("--label-a")
    p.add_argument("--label-b")
    p.add_argument("--corpus", type=Path, help="corpus for divergence samples")
    p.add_argument("--sample", type=int, help="pairs per disagreement bucket")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--scores-a", type=Path)
    p.add_argument("--scores-b", type=Path)
    p.add_argument("--sample-out", type=Path)
    p.add_argument("--out", required=True, type=Path)
    p.set_defaults(func=cmd_compare)

    p = sub.add_parser("stats", parents=[common], help="length statistics")
    p.add_argument("corpus", type=Path)
    p.add_argument("--max-tokens", type=int, help="also count pairs a length filter would drop")
    p.add_argument("--count-chars", action="store_true", help="count non-space characters instead of tokens")
    p.add_argument("--out", type=Path)
    p.set_defaults(func=cmd_stats)

    p = sub.add_parser("report", parents=[common], help="length shift between a corpus and its filtered version")
    p.add_argument("before", type=Path)
    p.add_argument("after", type=Path)
    p.add_argument("--count-chars", action="store_true")
    p.add_argument("--out", type=Path)
    p.set_defaults(func=cmd_report)

    p = sub.add_parser("profile", parents=[common], help="build a character-trigram language profile")
    p.add_argument("corpus", type=Path)
    p.add_argument("--side", choices=("src", "tgt"), required=True)
    p.add_argument("--lang", required=True)
    p.add_argument("--out", required=True, type=Path)
    p.set_defaults(func=cmd_profile)

    p = sub.add_parser("toy", help="write the bundled toy corpus, donor corpus and profiles")
    p.add_argument("--out-dir", required=True, type=Path)
    p.set_defaults(func=cmd_toy, threads=1, verbose=False)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except BitextError as exc:
        print(f"bitextfilter {args.command}: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"bitextfilter {args.command}: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
