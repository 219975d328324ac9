"""URL-only gating: domain blocklist, tiered word scoring, high-quality-source exclusion.

We never look at page content here; adult/malicious filtering is done on
the URL alone. Severity tiers: strict subword matching (separators removed
so split-up words are still caught), hard whole-word matching, and soft
words that need at least two matches.
"""
from __future__ import annotations

import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Optional

from .errors import UnparsableUrl
from .records import RejectReason

DATA_DIR = Path(__file__).parent / "data"

DEFAULT_BLOCK_CATEGORIES = (
    "adult",
    "phishing",
    "dating",
    "gambling",
    "filehosting",
    "ddos",
    "agressif",
    "chat",
    "mixed_adult",
    "arjel",
)

# Curated corpora commonly mixed into pretraining sets; excluded so the
# refined corpus stays pure web data.
DEFAULT_HQ_DOMAINS = frozenset(
    {
        "wikipedia.org",
        "arxiv.org",
        "github.com",
        "reddit.com",
        "stackoverflow.com",
        "stackexchange.com",
        "stackapps.com",
        "mathoverflow.net",
        "askubuntu.com",
        "news.ycombinator.com",
        "courtlistener.com",
        "statmt.org",
        "uspto.gov",
        "exporter.nih.gov",
        "ncbi.nlm.nih.gov",
        "irclogs.ubuntu.com",
    }
)

_SCHEME_RE = re.compile(r"^[a-zA-Z][a-zA-Z0-9+.\-]*://")
_HOST_OK_RE = re.compile(r"^[a-z0-9._\-]+$")
_WORD_RE = re.compile(r"[a-z0-9]+")


@dataclass(frozen=True)
class NormalizedUrl:
    host: str
    registrable_domain: str
    full_lower: str


def normalize_url(url: str) -> NormalizedUrl:
    """Lowercase, strip the scheme, and split out the host.

    ``registrable_domain`` is the last two host labels (no public-suffix
    list; blocklist matching walks every parent suffix anyway). Idempotent.
    """
    s = url.strip()
    if not s:
        raise UnparsableUrl("empty URL")
    s = _SCHEME_RE.sub("", s)
    if "//" in s.split("/", 1)[0]:
        raise UnparsableUrl(f"bad authority in {url!r}")
    full_lower = s.lower()
    authority = full_lower.split("/", 1)[0].split("?", 1)[0].split("#", 1)[0]
    if "@" in authority:
        authority = authority.rsplit("@", 1)[1]
    host = authority.rsplit(":", 1)[0] if re.search(r":\d*$", authority) else authority
    host = host.strip(".")
    if not host or " " in host or not _HOST_OK_RE.match(host):
        raise UnparsableUrl(f"no usable host in {url!r}")
    labels = host.split(".")
    registrable = ".".join(labels[-2:]) if len(labels) >= 2 else host
    return NormalizedUrl(host=host, registrable_domain=registrable, full_lower=full_lower)


def _host_suffixes(host: str) -> Iterable[str]:
    labels = host.split(".")
    for i in range(len(labels)):
        suffix = ".".join(labels[i:])
        if "." in suffix or i == 0:
            yield suffix


@dataclass
class DomainBlocklist:
    entries: frozenset = frozenset()
    categories: dict = field(default_factory=dict)
    allowlist: frozenset = frozenset()

    @classmethod
    def load(
        cls,
        directory: Path,
        categories: Iterable[str] = DEFAULT_BLOCK_CATEGORIES,
        allowlist: Iterable[str] = (),
    ) -> "DomainBlocklist":
        """Load one-domain-per-line files from category-named subdirectories.

        Each category is a directory containing a ``domains`` file (the
        common blocklist distribution layout) or a ``<category>.txt`` file.
        """
        directory = Path(directory)
        entries = set()
        cats = {}
        for category in categories:
            for candidate in (directory / category / "domains", directory / f"{category}.txt"):
                if candidate.is_file():
                    for line in candidate.read_text("utf-8").splitlines():
                        domain = line.strip().lower()
                        if domain and not domain.startswith("#"):
                            entries.add(domain)
                            cats[domain] = category
                    break
        return cls(
            entries=frozenset(entries),
            categories=cats,
            allowlist=frozenset(d.strip().lower() for d in allowlist if d.strip()),
        )


def domain_blocked(url: str, blocklist: DomainBlocklist) -> bool:
    """True iff the host or any parent domain is blocklisted (allowlist wins)."""
    host = normalize_url(url).host
    for suffix in _host_suffixes(host):
        if suffix in blocklist.allowlist:
            return False
        if suffix in blocklist.entries:
            return True
    return False


def _load_wordlist(path: Path) -> list[str]:
    words = []
    for line in Path(path).read_text("utf-8").splitlines():
        word = line.split("#", 1)[0].strip().lower()
        if word:
            words.append(word)
    return words


@dataclass
class ScoringWordLists:
    strict_subword: list[str] = field(default_factory=list)
    hard_whole_word: list[str] = field(default_factory=list)
    soft_words: list[str] = field(default_factory=list)
    soft_threshold: int = 2

    @classmethod
    def load(cls, directory: Path, soft_threshold: int = 2) -> "ScoringWordLists":
        directory = Path(directory)
        return cls(
            strict_subword=_load_wordlist(directory / "strict.txt"),
            hard_whole_word=_load_wordlist(directory / "hard.txt"),
            soft_words=_load_wordlist(directory / "soft.txt"),
            soft_threshold=soft_threshold,
        )

    @classmethod
    def default(cls) -> "ScoringWordLists":
        return cls.load(DATA_DIR / "wordlists")


@dataclass
class UrlVerdict:
    decision: str  # "keep" | "reject"
    reason: Optional[RejectReason] = None
    matches: list = field(default_factory=list)

    @property
    def kept(self) -> bool:
        return self.decision == "keep"


def score_url(url: str, lists: ScoringWordLists) -> UrlVerdict:
    """Three-tier word scoring over the lowercased, scheme-less URL.

    Strict words match as substrings with '.', '-', '/' separators removed
    (catching deliberately split-up words); hard words match whole words
    (maximal [a-z0-9] runs, so 'ass' never fires inside 'massachusetts');
    soft words reject only when at least ``soft_threshold`` match.
    """
    full = normalize_url(url).full_lower
    squeezed = full.replace(".", "").replace("-", "").replace("/", "")
    matches = []
    for word in lists.strict_subword:
        if word in squeezed:
            matches.append({"tier": "strict", "word": word})
    if matches:
        return UrlVerdict("reject", RejectReason.URL_WORD_SCORE, matches)
    tokens = _WORD_RE.findall(full)
    token_set = set(tokens)
    for word in lists.hard_whole_word:
        if word in token_set:
            matches.append({"tier": "hard", "word": word})
    if matches:
        return UrlVerdict("reject", RejectReason.URL_WORD_SCORE, matches)
    soft_hits = [
        {"tier": "soft", "word": tok} for tok in tokens if tok in set(lists.soft_words)
    ]
    if len(soft_hits) >= lists.soft_threshold:
        return UrlVerdict("reject", RejectReason.URL_WORD_SCORE, soft_hits)
    return UrlVerdict("keep", matches=soft_hits)


def hq_excluded(url: str, hq_domains: frozenset = DEFAULT_HQ_DOMAINS) -> bool:
    """True iff the host falls under a curated high-quality source domain."""
    host = normalize_url(url).host
    return any(suffix in hq_domains for suffix in _host_suffixes(host))


def url_gate(
    url: str,
    blocklist: DomainBlocklist,
    lists: ScoringWordLists,
    hq_domains: frozenset = DEFAULT_HQ_DOMAINS,
) -> UrlVerdict:
    """Fixed precedence: blocklist, then word score, then HQ exclusion."""
    if domain_blocked(url, blocklist):
        return UrlVerdict("reject", RejectReason.URL_BLOCKLISTED)
    verdict = score_url(url, lists)
    if not verdict.kept:
        return verdict
    if hq_excluded(url, hq_domains):
        return UrlVerdict("reject", RejectReason.URL_HQ_EXCLUDED)
    return verdict
