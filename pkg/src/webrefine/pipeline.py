"""End-to-end orchestration: config, sharding, the cross-part URL registry,
and the per-part run that chains every stage in fixed order.

Stage order is fixed (URL gates, extraction, language, document filters,
line corrections, fuzzy dedup, then exact dedup); a config listing stages
out of that order is rejected at load. Fuzzy dedup runs before exact dedup
because it prunes the corpus the expensive exact pass must hold in memory.
"""
from __future__ import annotations

import glob as globmod
import gzip
import json
import multiprocessing
import os
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Optional

from . import exact, extract, fuzzy, langid, quality, report, urlrules, warc
from .errors import ConfigError, RegistryUnavailable, UnparsableUrl
from .records import Document, RejectReason, StageStats, read_records, write_records

STAGE_ORDER = (
    "url_filter",
    "url_dedup",
    "extract",
    "lang_id",
    "repetition",
    "quality",
    "line_corrections",
    "fuzzy_dedup",
    "exact_dedup",
)

WORKERS_ENV = "WEBREFINE_WORKERS"


@dataclass
class ShardPlan:
    parts: int

    def part_of(self, dump_id: str, ordinal: int) -> int:
        return ordinal % self.parts


def plan_shards(dump_sizes: dict[str, int], parts: int) -> ShardPlan:
    """Interleaved modular split: ordinal o of every dump goes to part o mod parts."""
    if parts < 1:
        raise ConfigError("parts must be >= 1")
    return ShardPlan(parts=parts)


class KeptUrlRegistry:
    """Canonical URLs kept by previously processed parts, one per line on disk."""

    def __init__(self, path: Optional[Path] = None):
        self.path = Path(path) if path else None
        self.urls: set[str] = set()
        if self.path is not None and self.path.exists():
            try:
                self.urls = set(self.path.read_text("utf-8").splitlines())
            except OSError as exc:
                raise RegistryUnavailable(str(exc)) from exc
        self.urls.discard("")

    def __contains__(self, canonical: str) -> bool:
        return canonical in self.urls

    def add_many(self, canonicals):
        self.urls.update(canonicals)

    def save(self):
        if self.path is None:
            return
        tmp = self.path.with_suffix(self.path.suffix + ".tmp")
        tmp.write_text("\n".join(sorted(self.urls)) + "\n", "utf-8")
        os.replace(tmp, self.path)


def canonical_url(url: str) -> str:
    """Registry key: the full lowercased URL including the query string."""
    return urlrules.normalize_url(url).full_lower


def url_dedup_gate(url: str, registry: KeptUrlRegistry) -> Optional[RejectReason]:
    """UrlRevisit when an earlier part already kept this canonical URL."""
    if registry is None:
        raise RegistryUnavailable("no registry configured")
    if canonical_url(url) in registry:
        return RejectReason.URL_REVISIT
    return None


# --- configuration ---------------------------------------------------------

_SCHEMA = {
    "input": list,
    "output_dir": str,
    "dump_id": str,
    "part": int,
    "parts": int,
    "registry": (str, type(None)),
    "seed": int,
    "workers": (int, type(None)),
    "stages": list,
    "extractor": str,
    "figures": bool,
    "url": {
        "blocklist_dir": (str, type(None)),
        "block_categories": list,
        "wordlists_dir": (str, type(None)),
        "hq_exclusions": (list, type(None)),
        "allowlist": list,
        "soft_threshold": int,
    },
    "lang": {
        "language": str,
        "threshold": (int, float),
        "classifier": str,
    },
    "repetition": {
        "dup_line_frac": (int, float),
        "dup_para_frac": (int, float),
        "dup_line_char_frac": (int, float),
        "dup_para_char_frac": (int, float),
        "top_ngram_char_frac": dict,
        "dup_ngram_char_frac": dict,
    },
    "quality": {
        "min_words": int,
        "max_words": int,
        "min_mean_word_length": (int, float),
        "max_mean_word_length": (int, float),
        "max_symbol_word_ratio": (int, float),
        "max_bullet_line_frac": (int, float),
        "max_ellipsis_line_frac": (int, float),
        "min_alpha_word_frac": (int, float),
        "min_stopword_hits": int,
    },
    "lines": {
        "patterns_file": (str, type(None)),
        "budget": (int, float),
    },
    "fuzzy": {
        "n": int,
        "b": int,
        "r": int,
        "seed": int,
        "policy": str,
    },
    "exact": {
        "min_match": int,
        "strategy": str,
        "drop_partial_threshold": (int, float),
        "min_remaining_chars": int,
    },
}


def _check_keys(obj: dict, schema: dict, path: str = ""):
    for key, value in obj.items():
        if key not in schema:
            raise ConfigError(f"unknown config key {path + key!r}")
        expected = schema[key]
        if isinstance(expected, dict):
            if not isinstance(value, dict):
                raise ConfigError(f"config key {path + key!r} must be a table")
            _check_keys(value, expected, path + key + ".")
        elif not isinstance(value, expected) or isinstance(value, bool) and expected is int:
            raise ConfigError(f"config key {path + key!r} has the wrong type")


@dataclass
class PipelineConfig:
    input: list = field(default_factory=list)
    output_dir: str = "out"
    dump_id: str = "dump"
    part: int = 0
    parts: int = 1
    registry: Optional[str] = None
    seed: int = 0
    workers: Optional[int] = None
    stages: tuple = STAGE_ORDER
    extractor: str = "baseline"
    figures: bool = False
    url: dict = field(default_factory=dict)
    lang: dict = field(default_factory=dict)
    repetition: dict = field(default_factory=dict)
    quality: dict = field(default_factory=dict)
    lines: dict = field(default_factory=dict)
    fuzzy: dict = field(default_factory=dict)
    exact: dict = field(default_factory=dict)

    @classmethod
    def load(cls, source) -> "PipelineConfig":
        """Load from a JSON file path or a dict. Unknown keys fail fast."""
        if isinstance(source, (str, Path)):
            try:
                data = json.loads(Path(source).read_text("utf-8"))
            except (OSError, json.JSONDecodeError) as exc:
                raise ConfigError(f"cannot load config: {exc}") from exc
        else:
            data = dict(source)
        if not isinstance(data, dict):
            raise ConfigError("config root must be an object")
        _check_keys(data, _SCHEMA)
        cfg = cls(**{k: v for k, v in data.items()})
        cfg.stages = tuple(cfg.stages)
        _validate_stages(cfg.stages)
        if cfg.parts < 1 or not (0 <= cfg.part < cfg.parts):
            raise ConfigError("need parts >= 1 and 0 <= part < parts")
        if cfg.exact.get("strategy", exact.CUT) not in exact.STRATEGIES:
            raise ConfigError(f"unknown exact-dedup strategy {cfg.exact.get('strategy')!r}")
        return cfg

    def worker_count(self) -> int:
        if self.workers is not None:
            return max(1, self.workers)
        env = os.environ.get(WORKERS_ENV)
        return max(1, int(env)) if env else 1


def _validate_stages(stages):
    positions = []
    for stage in stages:
        if stage not in STAGE_ORDER:
            raise ConfigError(f"unknown stage {stage!r}")
        positions.append(STAGE_ORDER.index(stage))
    if positions != sorted(positions) or len(set(positions)) != len(positions):
        raise ConfigError(
            "stages must follow the fixed pipeline order "
            "(fuzzy dedup prunes the corpus before exact dedup)"
        )


# --- per-document preparation (parallelizable) -----------------------------


@dataclass
class StageRecord:
    stage: str
    bytes_in: int
    bytes_out: int
    passed: bool


@dataclass
class PrepareOutcome:
    doc_id: str
    url: str
    records: list  # of StageRecord
    reason: Optional[RejectReason] = None
    malformed: bool = False
    content: Optional[str] = None
    edits: dict = field(default_factory=dict)


class DocPipeline:
    """Per-document gating stages; picklable so worker processes can share it."""

    def __init__(self, config: PipelineConfig, registry_urls: frozenset):
        self.stages = config.stages
        self.extractor = config.extractor
        url_cfg = config.url
        blocklist_dir = url_cfg.get("blocklist_dir")
        if blocklist_dir:
            self.blocklist = urlrules.DomainBlocklist.load(
                Path(blocklist_dir),
                url_cfg.get("block_categories", urlrules.DEFAULT_BLOCK_CATEGORIES),
                url_cfg.get("allowlist", ()),
            )
        else:
            self.blocklist = urlrules.DomainBlocklist(
                allowlist=frozenset(url_cfg.get("allowlist", ()))
            )
        wordlists_dir = url_cfg.get("wordlists_dir")
        self.wordlists = (
            urlrules.ScoringWordLists.load(Path(wordlists_dir), url_cfg.get("soft_threshold", 2))
            if wordlists_dir
            else urlrules.ScoringWordLists.default()
        )
        hq = url_cfg.get("hq_exclusions")
        self.hq_domains = frozenset(hq) if hq is not None else urlrules.DEFAULT_HQ_DOMAINS
        self.registry_urls = registry_urls
        lang_cfg = config.lang
        self.language = lang_cfg.get("language", langid.DEFAULT_LANGUAGE)
        self.lang_threshold = lang_cfg.get("threshold", langid.DEFAULT_THRESHOLD)
        classifier = lang_cfg.get("classifier", "builtin")
        if classifier.startswith("external:"):
            self.classifier = langid.ExternalClassifier(classifier[len("external:"):])
        else:
            self.classifier = langid.TrigramClassifier.bundled()
        rep = dict(config.repetition)
        for key in ("top_ngram_char_frac", "dup_ngram_char_frac"):
            if key in rep:
                rep[key] = {int(k): v for k, v in rep[key].items()}
        self.repetition_thresholds = quality.RepetitionThresholds(**rep)
        self.quality_thresholds = quality.QualityThresholds(**config.quality)
        lines_cfg = config.lines
        self.line_rules = quality.LineRuleSet.load(
            lines_cfg.get("patterns_file"), lines_cfg.get("budget", 0.05)
        )

    def enabled(self, stage: str) -> bool:
        return stage in self.stages

    def prepare(self, candidate: tuple[str, str, str]) -> PrepareOutcome:
        doc_id, url, html = candidate
        outcome = PrepareOutcome(doc_id=doc_id, url=url, records=[])
        content = html
        size = len(content.encode("utf-8"))

        def reject(stage, reason, malformed=False):
            outcome.records.append(StageRecord(stage, size, 0, passed=False))
            outcome.reason = None if malformed else reason
            outcome.malformed = malformed
            return outcome

        if self.enabled("url_filter"):
            try:
                verdict = urlrules.url_gate(url, self.blocklist, self.wordlists, self.hq_domains)
            except UnparsableUrl:
                return reject("url_filter", None, malformed=True)
            if not verdict.kept:
                return reject("url_filter", verdict.reason)
            outcome.records.append(StageRecord("url_filter", size, size, passed=True))

        if self.enabled("url_dedup"):
            try:
                canonical = canonical_url(url)
            except UnparsableUrl:
                return reject("url_dedup", None, malformed=True)
            if canonical in self.registry_urls:
                return reject("url_dedup", RejectReason.URL_REVISIT)
            outcome.records.append(StageRecord("url_dedup", size, size, passed=True))

        if self.enabled("extract"):
            result = extract.extract_main_content(content, self.extractor)
            text = extract.format_text(result.text)
            if result.discarded or not text.strip():
                return reject("extract", RejectReason.EXTRACTION_EMPTY)
            new_size = len(text.encode("utf-8"))
            outcome.records.append(StageRecord("extract", size, new_size, passed=True))
            content, size = text, new_size

        if self.enabled("lang_id"):
            verdict = langid.language_gate(content, self.classifier, self.language, self.lang_threshold)
            if not verdict.kept:
                return reject("lang_id", verdict.reason)
            outcome.records.append(StageRecord("lang_id", size, size, passed=True))

        if self.enabled("repetition"):
            reason = quality.repetition_gate(
                quality.repetition_profile(content), self.repetition_thresholds
            )
            if reason:
                return reject("repetition", reason)
            outcome.records.append(StageRecord("repetition", size, size, passed=True))

        if self.enabled("quality"):
            reason = quality.quality_gate(quality.quality_profile(content), self.quality_thresholds)
            if reason:
                return reject("quality", reason)
            outcome.records.append(StageRecord("quality", size, size, passed=True))

        if self.enabled("line_corrections"):
            result = quality.line_corrections(content, self.line_rules)
            if result.reason:
                return reject("line_corrections", result.reason)
            new_content = result.content
            new_size = len(new_content.encode("utf-8"))
            outcome.records.append(StageRecord("line_corrections", size, new_size, passed=True))
            if result.removed_lines:
                outcome.edits["line_corrections"] = (
                    f"removed {result.removed_lines} lines / {result.removed_words} words"
                )
            content, size = new_content, new_size

        outcome.content = content
        return outcome


_WORKER_PIPELINE: Optional[DocPipeline] = None


def _init_worker(pipeline: DocPipeline):
    global _WORKER_PIPELINE
    _WORKER_PIPELINE = pipeline


def _prepare_one(candidate):
    return _WORKER_PIPELINE.prepare(candidate)


# --- part execution --------------------------------------------------------


@dataclass
class RunResult:
    records_written: int
    stats: list  # of StageStats
    reason_counts: dict
    malformed: int
    candidates: int
    output_path: Optional[Path] = None

    @property
    def accounted(self) -> int:
        return self.records_written + sum(self.reason_counts.values()) + self.malformed


def _expand_inputs(patterns) -> list[Path]:
    paths = []
    for pattern in patterns:
        matched = sorted(globmod.glob(str(pattern)))
        if not matched and Path(pattern).exists():
            matched = [str(pattern)]
        paths.extend(Path(p) for p in matched)
    if not paths:
        raise FileNotFoundError(f"no inputs matched {patterns!r}")
    return paths


def _iter_candidates(paths: list[Path]):
    """Yield (url, html) from WARC archives or (document) from record files."""
    for path in paths:
        name = path.name.lower()
        if name.endswith((".warc", ".warc.gz")):
            with open(path, "rb") as fh:
                for cand in warc.to_candidates(warc.iter_warc(fh)):
                    yield cand.url, cand.html
        elif name.endswith(".jsonl.gz"):
            with gzip.open(path, "rb") as fh:
                for doc in read_records(fh):
                    yield doc.url, doc.content
        else:
            with open(path, "rb") as fh:
                for doc in read_records(fh):
                    yield doc.url, doc.content


def run_part(config: PipelineConfig) -> RunResult:
    """Execute every configured stage for one part and write survivors + stats."""
    out_dir = Path(config.output_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    registry = KeptUrlRegistry(config.registry) if config.registry else KeptUrlRegistry()

    plan = plan_shards({}, config.parts)
    candidates = []
    total_candidates = 0
    for ordinal, (url, html) in enumerate(_iter_candidates(_expand_inputs(config.input))):
        total_candidates += 1
        if plan.part_of(config.dump_id, ordinal) != config.part:
            continue
        doc_id = f"{config.dump_id}-{config.part:04d}-{ordinal:08d}"
        candidates.append((doc_id, url, html))

    pipeline = DocPipeline(config, frozenset(registry.urls))
    workers = config.worker_count()
    if workers > 1 and len(candidates) > 1:
        with multiprocessing.Pool(workers, initializer=_init_worker, initargs=(pipeline,)) as pool:
            chunk = max(1, len(candidates) // (workers * 4))
            outcomes = pool.map(_prepare_one, candidates, chunksize=chunk)
    else:
        outcomes = [pipeline.prepare(c) for c in candidates]

    stats_map: dict[str, StageStats] = {}

    def stage_stats(name: str) -> StageStats:
        if name not in stats_map:
            stats_map[name] = StageStats(stage=name)
        return stats_map[name]

    ingest = StageStats(stage="ingest", docs_in=total_candidates, docs_out=len(candidates))
    reason_counts: dict[RejectReason, int] = {}
    malformed = 0
    for outcome in outcomes:
        ingest.bytes_in += outcome.records[0].bytes_in if outcome.records else 0
        for record in outcome.records:
            s = stage_stats(record.stage)
            s.docs_in += 1
            s.bytes_in += record.bytes_in
            if record.passed:
                s.docs_out += 1
                s.bytes_out += record.bytes_out
        if outcome.malformed:
            malformed += 1
        elif outcome.reason is not None:
            reason_counts[outcome.reason] = reason_counts.get(outcome.reason, 0) + 1
    ingest.bytes_out = ingest.bytes_in

    survivors = [
        Document(
            id=o.doc_id,
            url=o.url,
            content=o.content,
            dump_id=config.dump_id,
            part_id=config.part,
            annotations=dict(o.edits),
        )
        for o in outcomes
        if o.content is not None
    ]

    fuzzy_cfg = config.fuzzy
    params = fuzzy.MinHashParams(
        n=fuzzy_cfg.get("n", 5),
        b=fuzzy_cfg.get("b", 20),
        r=fuzzy_cfg.get("r", 450),
        seed=fuzzy_cfg.get("seed", config.seed),
    )

    if "fuzzy_dedup" in config.stages and survivors:
        tokens_by_id = {}
        for i, doc in enumerate(survivors):
            tokens = fuzzy.normalize_for_dedup(doc.content)
            tokens_by_id[doc.id] = tokens
            survivors[i] = replace(doc, token_count=len(tokens))
        s = stage_stats("fuzzy_dedup")
        s.docs_in = len(survivors)
        s.bytes_in = sum(d.byte_count for d in survivors)
        s.tokens_in = sum(d.token_count for d in survivors)
        index = fuzzy.LSHIndex(params)
        unsignable = set()
        for doc in survivors:
            shingles = fuzzy.shingle_set(tokens_by_id[doc.id], params.n)
            if not shingles:
                unsignable.add(doc.id)
                continue
            index.add(doc.id, fuzzy.minhash_signature(shingles, params))
        clusters = fuzzy.cluster_duplicates(index)
        kept_ids = fuzzy.select_survivors(
            clusters, fuzzy_cfg.get("policy", "smallest-id"), config.seed
        )
        kept_ids |= unsignable
        removed = len(survivors) - len([d for d in survivors if d.id in kept_ids])
        if removed:
            reason_counts[RejectReason.FUZZY_DUPLICATE] = (
                reason_counts.get(RejectReason.FUZZY_DUPLICATE, 0) + removed
            )
        survivors = [d for d in survivors if d.id in kept_ids]
        s.docs_out = len(survivors)
        s.bytes_out = sum(d.byte_count for d in survivors)
        s.tokens_out = sum(d.token_count for d in survivors)

    if "exact_dedup" in config.stages and survivors:
        exact_cfg = config.exact
        strategy = exact_cfg.get("strategy", exact.CUT)
        s = stage_stats("exact_dedup")
        s.docs_in = len(survivors)
        s.bytes_in = sum(d.byte_count for d in survivors)
        corpus = exact.tokenize_reversible(survivors)
        s.tokens_in = sum(corpus.doc_token_count(i) for i in range(len(survivors)))
        ranges = exact.find_duplicate_ranges(corpus, exact_cfg.get("min_match", 50))
        spans_by_doc = exact.map_ranges_to_chars(corpus, ranges)
        kept_docs = []
        dropped = 0
        for i, doc in enumerate(survivors):
            spans = spans_by_doc.get(i, [])
            result = exact.apply_strategy(
                doc.content,
                spans,
                strategy,
                exact_cfg.get("min_remaining_chars", exact.DEFAULT_MIN_REMAINING_CHARS),
                exact_cfg.get("drop_partial_threshold", exact.DEFAULT_DROP_PARTIAL_THRESHOLD),
            )
            if isinstance(result, exact.Dropped):
                dropped += 1
                continue
            new_doc = doc
            if result.content != doc.content:
                new_doc = doc.with_content(result.content).annotate(
                    "exact_dedup", f"cut {len(spans)} spans / {sum(sp.length for sp in spans)} chars"
                )
            if result.loss_mask is not None:
                new_doc = new_doc.annotate(
                    "exact_dedup",
                    "mask " + ",".join(f"{sp.start}-{sp.end}" for sp in result.loss_mask),
                )
            new_doc = replace(
                new_doc, token_count=len(fuzzy.normalize_for_dedup(new_doc.content))
            )
            kept_docs.append(new_doc)
        if dropped:
            reason_counts[RejectReason.EXACT_DUP_RESIDUE] = (
                reason_counts.get(RejectReason.EXACT_DUP_RESIDUE, 0) + dropped
            )
        survivors = kept_docs
        s.docs_out = len(survivors)
        s.bytes_out = sum(d.byte_count for d in survivors)
        s.tokens_out = sum(d.token_count or 0 for d in survivors)

    stats = [ingest] + [stats_map[name] for name in STAGE_ORDER if name in stats_map]

    output_path = out_dir / f"part-{config.part:05d}.jsonl"
    with open(output_path, "wb") as fh:
        written = write_records(survivors, fh)
    (out_dir / "stats.tsv").write_text(report.to_tsv(stats), "utf-8")
    (out_dir / "stats.txt").write_text(report.render_table(stats), "utf-8")
    if config.figures:
        report.save_stage_figure(stats, out_dir / "stages.png")

    if config.registry:
        registry.add_many(canonical_url(d.url) for d in survivors)
        registry.save()

    return RunResult(
        records_written=written,
        stats=stats,
        reason_counts=reason_counts,
        malformed=malformed,
        candidates=len(candidates),
        output_path=output_path,
    )
