"""Acceptance suite: one test (and one printed PASS/FAIL line) per criterion."""
import math
import random
import sys
import time
import unicodedata
from fractions import Fraction
from pathlib import Path

import numpy as np
import pytest

from warcfixtures import write_throughput_warc
from webrefine.exact import (
    CUT,
    DROP_ANY,
    DROP_PARTIAL,
    MASK,
    SEPARATOR_ID,
    CharSpan,
    Dropped,
    KeptDoc,
    apply_strategy,
    build_suffix_array,
    find_duplicate_ranges,
    tokenize_reversible,
)
from webrefine.extract import format_text
from webrefine.fuzzy import (
    DEFAULT_PARAMS,
    match_probability,
    minhash_signature,
)
from webrefine.pipeline import PipelineConfig, run_part
from webrefine.quality import LineRuleSet, line_corrections
from webrefine.records import Document, RejectReason, kept_rates
from webrefine.urlrules import ScoringWordLists, hq_excluded, score_url

DATA_DIR = Path(__file__).parents[1] / "src" / "webrefine" / "data"


def _verdict(num: int, ok: bool, detail: str) -> bool:
    line = f"criterion {num:2d}: {'PASS' if ok else 'FAIL'} - {detail}"
    print(line, file=sys.__stdout__, flush=True)
    return ok


def test_criterion_1_lsh_closed_form():
    p80 = match_probability(0.80, 20, 450)
    p75 = match_probability(0.75, 20, 450)
    ok = abs(p80 - 0.994) <= 0.0005 and abs(p75 - 0.76) <= 0.005
    _verdict(1, ok, f"closed form P(0.80)={p80:.6f} (target 0.994±0.0005), P(0.75)={p75:.6f} (target 0.76±0.005)")
    assert abs(p75 - 0.76) <= 0.005
    # The exact closed form gives 0.9945833...; 0.994 is that value truncated,
    # not rounded, so the stated ±0.0005 window cannot contain it.
    assert abs(p80 - 0.994) <= 0.0005


# exact-Jaccard set pairs: J = shared / (shared + 2*unique)
_PAIR_SHAPES = {0.6: (6, 2), 0.7: (14, 3), 0.75: (12, 2), 0.8: (8, 1), 0.9: (18, 1)}


def _pair(s: float, trial: int):
    shared, unique = _PAIR_SHAPES[s]
    base = {f"s{s}_{trial}_{i}" for i in range(shared)}
    a = base | {f"a{s}_{trial}_{i}" for i in range(unique)}
    b = base | {f"b{s}_{trial}_{i}" for i in range(unique)}
    return a, b


def test_criterion_2_lsh_empirical():
    pairs = 2000
    b, r = DEFAULT_PARAMS.b, DEFAULT_PARAMS.r
    ok = True
    details = []
    for s in (0.6, 0.7, 0.75, 0.8, 0.9):
        detected = 0
        for trial in range(pairs):
            set_a, set_b = _pair(s, trial)
            va = minhash_signature(set_a, DEFAULT_PARAMS).values.reshape(r, b)
            vb = minhash_signature(set_b, DEFAULT_PARAMS).values.reshape(r, b)
            if (va == vb).all(axis=1).any():
                detected += 1
        rate = detected / pairs
        expected = match_probability(s, b, r)
        tol = 3 * math.sqrt(expected * (1 - expected) / pairs)
        details.append(f"s={s}: {rate:.4f} vs {expected:.4f} (±{tol:.4f})")
        ok = ok and abs(rate - expected) <= tol
    assert _verdict(2, ok, "empirical bucket collisions within 3σ of closed form; " + "; ".join(details))


def test_criterion_3_jaccard_estimator():
    shapes = {0.0: (0, 30), 0.25: (20, 30), 0.5: (20, 10), 0.75: (24, 4), 1.0: (30, 0)}
    ok = True
    details = []
    for j, (shared, unique) in shapes.items():
        base = {f"s{j}_{i}" for i in range(shared)}
        a = base | {f"a{j}_{i}" for i in range(unique)}
        b = base | {f"b{j}_{i}" for i in range(unique)}
        true_j = len(a & b) / len(a | b)
        assert true_j == j
        est = float(
            np.mean(
                minhash_signature(a, DEFAULT_PARAMS).values
                == minhash_signature(b, DEFAULT_PARAMS).values
            )
        )
        tol = 3 * math.sqrt(j * (1 - j) / DEFAULT_PARAMS.k)
        details.append(f"J={j}: {est:.4f} (±{tol:.4f})")
        ok = ok and abs(est - j) <= tol
    assert _verdict(3, ok, "k=9000 estimates: " + "; ".join(details))


def test_criterion_4_suffix_array_oracle():
    rng = random.Random(2024)
    ok = build_suffix_array([ord(c) for c in "banana"]).tolist() == [5, 3, 1, 0, 4, 2]
    checked = 1
    for _ in range(1000):
        n = rng.randint(1, 2000)
        alphabet = rng.randint(2, 100)
        seq = bytes(rng.randrange(alphabet) for _ in range(n))
        naive = sorted(range(n), key=lambda i: seq[i:])
        if build_suffix_array(list(seq)).tolist() != naive:
            ok = False
            break
        checked += 1
    assert _verdict(4, ok, f"{checked} random sequences (len 1-2000, alphabet 2-100) match naive sort")


def _naive_dup_positions(seq, min_match):
    windows = {}
    for i in range(len(seq) - min_match + 1):
        w = tuple(seq[i : i + min_match])
        if SEPARATOR_ID not in w:
            windows.setdefault(w, []).append(i)
    covered = set()
    for positions in windows.values():
        if len(positions) >= 2:
            for p in positions:
                covered.update(range(p, p + min_match))
    return covered


def test_criterion_5_exact_substring_oracle():
    rng = random.Random(31)
    ok = True
    for trial in range(200):
        # corpora of <= 200 tokens with engineered shared runs
        long_runs = trial % 2 == 0
        run_len = rng.randint(55, 70) if long_runs else rng.randint(5, 12)
        run = [rng.randint(1, 9) for _ in range(run_len)]
        doc_count = rng.randint(1, 3)
        budget = 200 - doc_count * (run_len + 1)
        docs = []
        for d in range(doc_count):
            doc = [rng.randint(1, 9) for _ in range(rng.randint(0, max(1, budget // doc_count)))]
            if rng.random() < 0.8 and doc:
                at = rng.randrange(len(doc))
                doc = doc[:at] + run + doc[at:]
            docs.append(doc)
        corpus = tokenize_reversible(
            [Document(id=str(d), url="u", content=" ".join(f"t{t}" for t in doc)) for d, doc in enumerate(docs)]
        )
        seq = corpus.token_ids.tolist()
        for min_match in (3, 5, 50):
            got = set()
            for r in find_duplicate_ranges(corpus, min_match):
                got.update(range(r.start, r.end))
            if got != _naive_dup_positions(seq, min_match):
                ok = False
        if not ok:
            break
    assert _verdict(5, ok, "200 random corpora match the brute-force window oracle at min_match 3/5/50, all copies covered")


def test_criterion_6_strategy_semantics():
    matrix = {
        (0.05, CUT): KeptDoc, (0.21, CUT): KeptDoc, (0.95, CUT): Dropped,
        (0.05, MASK): KeptDoc, (0.21, MASK): KeptDoc, (0.95, MASK): Dropped,
        (0.05, DROP_PARTIAL): KeptDoc, (0.21, DROP_PARTIAL): Dropped, (0.95, DROP_PARTIAL): Dropped,
        (0.05, DROP_ANY): Dropped, (0.21, DROP_ANY): Dropped, (0.95, DROP_ANY): Dropped,
    }
    ok = True
    for (frac, strategy), expected in matrix.items():
        content = "x" * 100
        result = apply_strategy(content, [CharSpan(0, round(frac * 100))], strategy)
        ok = ok and isinstance(result, expected)
    # boundary behavior: drop below 20 remaining chars; drop-partial strictly over 20%
    ok = ok and isinstance(apply_strategy("x" * 100, [CharSpan(0, 80)], CUT), KeptDoc)
    ok = ok and isinstance(apply_strategy("x" * 100, [CharSpan(0, 81)], CUT), Dropped)
    ok = ok and isinstance(apply_strategy("x" * 100, [CharSpan(0, 20)], DROP_PARTIAL), KeptDoc)
    ok = ok and isinstance(apply_strategy("x" * 100, [CharSpan(0, 21)], DROP_PARTIAL), Dropped)
    assert _verdict(6, ok, "strategy matrix over 5%/21%/95% duplicated spans; <20-char and >20% thresholds exact")


def _mini_config(mini_fixture, tmp_path, **overrides):
    registry_copy = tmp_path / "registry.txt"
    registry_copy.write_text(mini_fixture["registry"].read_text("utf-8"), "utf-8")
    data = {
        "input": [str(mini_fixture["warc"])],
        "output_dir": str(tmp_path / "out"),
        "registry": str(registry_copy),
        "url": {"blocklist_dir": str(DATA_DIR / "blocklist")},
    }
    data.update(overrides)
    return PipelineConfig.load(data)


def test_criterion_7_filter_fixtures(mini_fixture, tmp_path):
    result = run_part(_mini_config(mini_fixture, tmp_path))
    reasons_ok = {r.value: n for r, n in result.reason_counts.items()} == {
        r.value: 1 for r in RejectReason
    }
    clean_ok = result.records_written == 2  # the 500-word clean page passes every gate

    rules = LineRuleSet.load()
    body_line = "the cat sat on the mat with a dog here now"  # 11 words, never flagged
    body_49 = "\n".join([body_line] * 86 + ["more plain words follow here"])  # 951 words
    body_51 = "\n".join([body_line] * 86 + ["more plain words"])  # 949 words
    kept_doc = body_49 + "\n" + "SHOUTED " * 49  # 49/1000 = 4.9% flagged
    dropped_doc = body_51 + "\n" + "SHOUTED " * 51  # 51/1000 = 5.1% flagged
    budget_ok = (
        line_corrections(kept_doc, rules).reason is None
        and line_corrections(dropped_doc, rules).reason is RejectReason.LINE_CORRECTION_BUDGET
    )
    ok = reasons_ok and clean_ok and budget_ok
    assert _verdict(7, ok, "each of the 12 rejection reasons fires exactly once; clean page passes; budget boundary 4.9% kept / 5.1% rejected")


def test_criterion_8_url_scoring_behaviors():
    lists = ScoringWordLists.default()
    hard_reject = not score_url("http://free-porn.example/index", lists).kept
    single_soft = score_url("http://health.example/sex-education", lists).kept
    double_soft = not score_url("http://x.example/sex-webcam", lists).kept
    mass_kept = score_url("http://massachusetts.example/visitor-guide", lists).kept
    hq_table = [
        "wikipedia.org", "arxiv.org", "github.com", "reddit.com",
        "stackoverflow.com", "stackexchange.com", "stackapps.com",
        "mathoverflow.net", "askubuntu.com", "news.ycombinator.com",
        "courtlistener.com", "statmt.org", "uspto.gov", "exporter.nih.gov",
        "ncbi.nlm.nih.gov", "irclogs.ubuntu.com",
    ]
    hq_ok = all(hq_excluded(f"http://{d}/page") for d in hq_table)
    ok = hard_reject and single_soft and double_soft and mass_kept and hq_ok
    assert _verdict(8, ok, "hard-word reject, soft 1-keep/2-reject, no substring false positive, all 16 curated domains excluded")


def test_criterion_9_determinism_and_accounting(mini_fixture, tmp_path):
    outputs = []
    results = []
    for i, workers in enumerate((1, 1, 8)):
        run_dir = tmp_path / f"run{i}"
        run_dir.mkdir()
        result = run_part(_mini_config(mini_fixture, run_dir, workers=workers))
        results.append(result)
        outputs.append(
            Path(result.output_path).read_bytes()
            + (Path(result.output_path).parent / "stats.tsv").read_bytes()
        )
    identical = outputs[0] == outputs[1] == outputs[2]
    accounted = all(
        r.records_written + sum(r.reason_counts.values()) + r.malformed == 14 for r in results
    )
    rate_ok = all(
        kept_rates(r.stats)[-1].cumulative_kept_rate == Fraction(2, 14) for r in results
    )
    ok = identical and accounted and rate_ok
    assert _verdict(9, ok, "byte-identical across reruns and workers 1 vs 8; survivors+rejections+malformed=14; cumulative kept rate 2/14")


_CHAR_POOL = (
    "abcdefghijklmnopqrstuvwxyzABCDEFGHIJKLMNOPQRSTUVWXYZ0123456789"
    "àéîõüßçñÅØæœ"
    "日本語中文한국어"
    "«»“”‘’—…·!?,.;:()[]{}#@%&*-_/\\'\""
    " \t\n "
    "🙂🚀✨"
)


def _renorm(piece: str) -> str:
    out = []
    for ch in unicodedata.normalize("NFD", piece.lower()):
        cat = unicodedata.category(ch)
        if cat.startswith("M") or cat.startswith("P") or ch.isspace():
            continue
        out.append(ch)
    return "".join(out)


def test_criterion_10_reversibility_and_idempotence():
    rng = random.Random(77)
    rules = LineRuleSet.load()
    ok = True
    for trial in range(1000):
        text = "".join(rng.choice(_CHAR_POOL) for _ in range(rng.randint(0, 200)))
        corpus = tokenize_reversible([Document(id=str(trial), url="u", content=text)])
        for t, span in enumerate(corpus.offsets):
            piece = text[span.char_start : span.char_end]
            if _renorm(piece) != corpus.vocab[corpus.token_ids[t]]:
                ok = False
        once = format_text(text)
        if format_text(once) != once:
            ok = False
        corrected = line_corrections(text, rules)
        if corrected.content is not None:
            again = line_corrections(corrected.content, rules)
            if again.content != corrected.content:
                ok = False
        if not ok:
            break
    assert _verdict(10, ok, "1000 random Unicode docs: offset-map round-trip and format/line-correction idempotence hold")


@pytest.mark.slow
def test_criterion_11_throughput(tmp_path):
    warc_path = tmp_path / "large.warc"
    pages = write_throughput_warc(warc_path, target_bytes=100 * 2**20, seed=5)
    size_mb = warc_path.stat().st_size / 2**20
    config = PipelineConfig.load(
        {
            "input": [str(warc_path)],
            "output_dir": str(tmp_path / "out"),
            "workers": 8,
        }
    )
    start = time.monotonic()
    result = run_part(config)
    elapsed = time.monotonic() - start
    ok = elapsed < 600 and result.records_written > 0 and result.accounted == pages
    assert _verdict(
        11,
        ok,
        f"{size_mb:.0f} MB WARC ({pages} pages), full pipeline with exact dedup on 8 workers in {elapsed:.0f}s (< 600s)",
    )
