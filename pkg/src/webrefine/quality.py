"""Document-wise repetition and quality heuristics, plus line-wise corrections.

Repetition and quality thresholds default to the widely used web-filtering
values (configurable); line corrections remove boilerplate lines and drop
the whole document when the flagged lines exceed the word budget (5%).
"""
from __future__ import annotations

import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

from .records import RejectReason

DATA_DIR = Path(__file__).parent / "data"

_WORD_RE = re.compile(r"\S+")
_ALPHA_RE = re.compile(r"[^\W\d_]", re.UNICODE)


def _words_with_spans(text: str) -> list[tuple[str, int, int]]:
    return [(m.group(0), m.start(), m.end()) for m in _WORD_RE.finditer(text)]


def _merged_length(spans: list[tuple[int, int]]) -> int:
    """Total length of the union of (start, end) intervals."""
    if not spans:
        return 0
    spans = sorted(spans)
    total = 0
    cur_start, cur_end = spans[0]
    for start, end in spans[1:]:
        if start > cur_end:
            total += cur_end - cur_start
            cur_start, cur_end = start, end
        else:
            cur_end = max(cur_end, end)
    return total + (cur_end - cur_start)


TOP_NGRAM_SIZES = (2, 3, 4)
DUP_NGRAM_SIZES = (5, 6, 7, 8, 9, 10)


@dataclass
class RepetitionProfile:
    dup_line_frac: float = 0.0
    dup_para_frac: float = 0.0
    dup_line_char_frac: float = 0.0
    dup_para_char_frac: float = 0.0
    top_ngram_char_frac: dict = field(default_factory=dict)  # n -> fraction
    dup_ngram_char_frac: dict = field(default_factory=dict)  # n -> fraction


def _dup_fracs(units: list[str]) -> tuple[float, float]:
    if not units:
        return 0.0, 0.0
    seen = set()
    dup_count = 0
    dup_chars = 0
    total_chars = sum(len(u) for u in units)
    for unit in units:
        if unit in seen:
            dup_count += 1
            dup_chars += len(unit)
        else:
            seen.add(unit)
    char_frac = dup_chars / total_chars if total_chars else 0.0
    return dup_count / len(units), char_frac


def repetition_profile(text: str) -> RepetitionProfile:
    """Duplicate line/paragraph fractions and repeated-n-gram character coverage.

    Lines are newline-separated, paragraphs blank-line-separated; both are
    stripped before exact matching. N-gram coverage is the unioned character
    span of occurrences divided by the total character count.
    """
    lines = [ln.strip() for ln in text.split("\n")]
    lines = [ln for ln in lines if ln]
    paras = [p.strip() for p in re.split(r"\n\s*\n", text)]
    paras = [p for p in paras if p]
    dup_line_frac, dup_line_char_frac = _dup_fracs(lines)
    dup_para_frac, dup_para_char_frac = _dup_fracs(paras)

    words = _words_with_spans(text)
    total_chars = len(text)
    top_fracs = {}
    dup_fracs = {}
    for n in TOP_NGRAM_SIZES + DUP_NGRAM_SIZES:
        occurrences: dict[tuple, list[tuple[int, int]]] = {}
        for i in range(len(words) - n + 1):
            gram = tuple(w[0] for w in words[i : i + n])
            occurrences.setdefault(gram, []).append((words[i][1], words[i + n - 1][2]))
        if n in TOP_NGRAM_SIZES:
            best = 0.0
            for spans in occurrences.values():
                if len(spans) >= 2:
                    frac = _merged_length(spans) / total_chars
                    best = max(best, frac)
            top_fracs[n] = best
        else:
            spans = [s for occ in occurrences.values() if len(occ) >= 2 for s in occ]
            dup_fracs[n] = _merged_length(spans) / total_chars if total_chars else 0.0
    return RepetitionProfile(
        dup_line_frac=dup_line_frac,
        dup_para_frac=dup_para_frac,
        dup_line_char_frac=dup_line_char_frac,
        dup_para_char_frac=dup_para_char_frac,
        top_ngram_char_frac=top_fracs,
        dup_ngram_char_frac=dup_fracs,
    )


@dataclass
class RepetitionThresholds:
    dup_line_frac: float = 0.30
    dup_para_frac: float = 0.30
    dup_line_char_frac: float = 0.20
    dup_para_char_frac: float = 0.20
    top_ngram_char_frac: dict = field(
        default_factory=lambda: {2: 0.20, 3: 0.18, 4: 0.16}
    )
    dup_ngram_char_frac: dict = field(
        default_factory=lambda: {5: 0.15, 6: 0.14, 7: 0.13, 8: 0.12, 9: 0.11, 10: 0.10}
    )


def repetition_gate(
    profile: RepetitionProfile, thresholds: Optional[RepetitionThresholds] = None
) -> Optional[RejectReason]:
    """None to keep; Repetition when any fraction strictly exceeds its threshold."""
    t = thresholds or RepetitionThresholds()
    if (
        profile.dup_line_frac > t.dup_line_frac
        or profile.dup_para_frac > t.dup_para_frac
        or profile.dup_line_char_frac > t.dup_line_char_frac
        or profile.dup_para_char_frac > t.dup_para_char_frac
    ):
        return RejectReason.REPETITION
    for n, limit in t.top_ngram_char_frac.items():
        if profile.top_ngram_char_frac.get(n, 0.0) > limit:
            return RejectReason.REPETITION
    for n, limit in t.dup_ngram_char_frac.items():
        if profile.dup_ngram_char_frac.get(n, 0.0) > limit:
            return RejectReason.REPETITION
    return None


def _load_stopwords() -> frozenset:
    words = (DATA_DIR / "stopwords.txt").read_text("utf-8").split()
    return frozenset(words)


STOPWORDS = _load_stopwords()

_BULLET_RE = re.compile(r"^[•\-\*]\s")
_TOKEN_RE = re.compile(r"[a-z']+")


@dataclass
class QualityProfile:
    word_count: int = 0
    mean_word_length: float = 0.0
    symbol_word_ratio: float = 0.0
    bullet_line_frac: float = 0.0
    ellipsis_line_frac: float = 0.0
    alpha_word_frac: float = 0.0
    stopword_hits: int = 0


def quality_profile(text: str) -> QualityProfile:
    words = [w for w, _, _ in _words_with_spans(text)]
    lines = [ln for ln in (l.strip() for l in text.split("\n")) if ln]
    word_count = len(words)
    mean_len = sum(len(w) for w in words) / word_count if word_count else 0.0
    symbols = text.count("#") + text.count("…") + text.count("...")
    symbol_ratio = symbols / word_count if word_count else 0.0
    bullets = sum(1 for ln in lines if _BULLET_RE.match(ln))
    ellipses = sum(1 for ln in lines if ln.endswith("…") or ln.endswith("..."))
    alpha_words = sum(1 for w in words if _ALPHA_RE.search(w))
    stop_hits = sum(1 for tok in _TOKEN_RE.findall(text.lower()) if tok in STOPWORDS)
    n_lines = len(lines)
    return QualityProfile(
        word_count=word_count,
        mean_word_length=mean_len,
        symbol_word_ratio=symbol_ratio,
        bullet_line_frac=bullets / n_lines if n_lines else 0.0,
        ellipsis_line_frac=ellipses / n_lines if n_lines else 0.0,
        alpha_word_frac=alpha_words / word_count if word_count else 0.0,
        stopword_hits=stop_hits,
    )


@dataclass
class QualityThresholds:
    min_words: int = 50
    max_words: int = 100_000
    min_mean_word_length: float = 3.0
    max_mean_word_length: float = 10.0
    max_symbol_word_ratio: float = 0.10
    max_bullet_line_frac: float = 0.90
    max_ellipsis_line_frac: float = 0.30
    min_alpha_word_frac: float = 0.80
    min_stopword_hits: int = 2


def quality_gate(
    profile: QualityProfile, thresholds: Optional[QualityThresholds] = None
) -> Optional[RejectReason]:
    """None to keep; Quality when any bound is violated. Bounds are inclusive."""
    t = thresholds or QualityThresholds()
    ok = (
        t.min_words <= profile.word_count <= t.max_words
        and t.min_mean_word_length <= profile.mean_word_length <= t.max_mean_word_length
        and profile.symbol_word_ratio <= t.max_symbol_word_ratio
        and profile.bullet_line_frac <= t.max_bullet_line_frac
        and profile.ellipsis_line_frac <= t.max_ellipsis_line_frac
        and profile.alpha_word_frac >= t.min_alpha_word_frac
        and profile.stopword_hits >= t.min_stopword_hits
    )
    return None if ok else RejectReason.QUALITY


ENGAGEMENT_WORDS = (
    "like", "likes", "share", "shares", "comment", "comments", "view", "views",
    "follower", "followers", "retweet", "retweets", "subscriber", "subscribers",
    "upvote", "upvotes",
)

_COUNTER_RE = re.compile(
    r"^(?:\d[\d.,]*\s*[km]?\s+)?(?:%s)$" % "|".join(ENGAGEMENT_WORDS),
    re.IGNORECASE,
)
_DIGIT_RE = re.compile(r"\d")
_EDGE_PUNCT = " \t.,:;!?…·|>»›-"


@dataclass
class LineRuleSet:
    start_patterns: list[str] = field(default_factory=list)
    end_patterns: list[str] = field(default_factory=list)
    any_patterns: list[str] = field(default_factory=list)
    max_pattern_words: int = 10
    doc_discard_budget: float = 0.05

    @classmethod
    def load(cls, path: Optional[Path] = None, doc_discard_budget: float = 0.05) -> "LineRuleSet":
        path = Path(path) if path else DATA_DIR / "line_patterns.txt"
        rules = cls(doc_discard_budget=doc_discard_budget)
        for line in path.read_text("utf-8").splitlines():
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            kind, _, pattern = line.partition(":")
            pattern = pattern.strip().lower()
            if kind == "start":
                rules.start_patterns.append(pattern)
            elif kind == "end":
                rules.end_patterns.append(pattern)
            elif kind == "any":
                rules.any_patterns.append(pattern)
        return rules


def _line_flagged(line: str, rules: LineRuleSet) -> bool:
    stripped = line.strip()
    if not stripped:
        return False
    alpha = _ALPHA_RE.findall(stripped)
    if alpha:
        upper = sum(1 for c in alpha if c.isupper())
        if upper / len(alpha) > 0.5:
            return True
    else:
        return True  # digits/punctuation only
    words = stripped.split()
    if len(words) == 1:
        return True
    if _COUNTER_RE.match(stripped):
        return True
    if len(words) <= rules.max_pattern_words:
        normalized = stripped.lower().strip(_EDGE_PUNCT)
        for pat in rules.start_patterns:
            if normalized.startswith(pat):
                return True
        for pat in rules.end_patterns:
            if normalized.endswith(pat):
                return True
        for pat in rules.any_patterns:
            if pat in normalized:
                return True
    return False


@dataclass
class LineCorrectionResult:
    content: Optional[str]  # None when the document is discarded
    reason: Optional[RejectReason]
    removed_lines: int
    removed_words: int
    total_words: int


def line_corrections(text: str, rules: Optional[LineRuleSet] = None) -> LineCorrectionResult:
    """Remove boilerplate lines; reject the document over the word budget.

    Whole lines are removed (never edited in place), so the output is a
    subsequence of the input lines and the operation is idempotent.
    """
    rules = rules or LineRuleSet.load()
    lines = text.split("\n")
    total_words = sum(len(ln.split()) for ln in lines)
    kept = []
    removed_words = 0
    removed_lines = 0
    for line in lines:
        if _line_flagged(line, rules):
            removed_lines += 1
            removed_words += len(line.split())
        else:
            kept.append(line)
    if total_words and removed_words > rules.doc_discard_budget * total_words:
        return LineCorrectionResult(
            None, RejectReason.LINE_CORRECTION_BUDGET, removed_lines, removed_words, total_words
        )
    return LineCorrectionResult("\n".join(kept), None, removed_lines, removed_words, total_words)
