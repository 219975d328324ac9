"""Document model, rejection taxonomy, stage statistics, and the on-disk record format.

Records are stored as UTF-8 JSON lines, one document per line, newline
terminated. This keeps intermediate outputs streamable and greppable.
"""
from __future__ import annotations

import enum
import json
from dataclasses import dataclass, field, replace
from fractions import Fraction
from typing import IO, Iterable, Iterator, Optional

from .errors import ChainBroken, MalformedRecord, SinkError, Truncated


class RejectReason(enum.Enum):
    URL_BLOCKLISTED = "UrlBlocklisted"
    URL_WORD_SCORE = "UrlWordScore"
    URL_HQ_EXCLUDED = "UrlHqExcluded"
    EXTRACTION_EMPTY = "ExtractionEmpty"
    LANGUAGE_SCORE = "LanguageScore"
    LANGUAGE_MISMATCH = "LanguageMismatch"
    REPETITION = "Repetition"
    QUALITY = "Quality"
    LINE_CORRECTION_BUDGET = "LineCorrectionBudget"
    FUZZY_DUPLICATE = "FuzzyDuplicate"
    EXACT_DUP_RESIDUE = "ExactDupResidue"
    URL_REVISIT = "UrlRevisit"


@dataclass(frozen=True)
class Document:
    """One web page's extracted text plus provenance.

    Immutable after construction; derive edited documents with
    :meth:`with_content`. ``char_count`` always equals ``len(content)``
    (Unicode scalar values).
    """

    id: str
    url: str
    content: str
    dump_id: str = ""
    part_id: int = 0
    token_count: Optional[int] = None
    annotations: dict = field(default_factory=dict)

    @property
    def char_count(self) -> int:
        return len(self.content)

    @property
    def byte_count(self) -> int:
        return len(self.content.encode("utf-8"))

    def with_content(self, content: str) -> "Document":
        return replace(self, content=content, token_count=None)

    def annotate(self, stage: str, summary: str) -> "Document":
        new = dict(self.annotations)
        new[stage] = summary
        return replace(self, annotations=new)


@dataclass
class StageStats:
    """Per-stage in/out accounting. Merge per-worker stats with ``+``."""

    stage: str
    docs_in: int = 0
    docs_out: int = 0
    bytes_in: int = 0
    bytes_out: int = 0
    tokens_in: Optional[int] = None
    tokens_out: Optional[int] = None

    def __add__(self, other: "StageStats") -> "StageStats":
        if self.stage != other.stage:
            raise ValueError(f"cannot merge stats for {self.stage!r} and {other.stage!r}")

        def opt_sum(a, b):
            if a is None and b is None:
                return None
            return (a or 0) + (b or 0)

        return StageStats(
            stage=self.stage,
            docs_in=self.docs_in + other.docs_in,
            docs_out=self.docs_out + other.docs_out,
            bytes_in=self.bytes_in + other.bytes_in,
            bytes_out=self.bytes_out + other.bytes_out,
            tokens_in=opt_sum(self.tokens_in, other.tokens_in),
            tokens_out=opt_sum(self.tokens_out, other.tokens_out),
        )

    @property
    def rejected(self) -> int:
        return self.docs_in - self.docs_out


@dataclass
class StageRate:
    stage: str
    step_kept_rate: Fraction
    cumulative_kept_rate: Fraction


def kept_rates(stats: list[StageStats]) -> list[StageRate]:
    """Per-stage and cumulative kept rates, exact rational arithmetic.

    Stages must chain: ``docs_in`` of each stage equals ``docs_out`` of the
    previous one. A 0/0 stage reports rate 0.
    """
    if not stats:
        raise ValueError("stats list is empty")
    for prev, cur in zip(stats, stats[1:]):
        if cur.docs_in != prev.docs_out:
            raise ChainBroken(
                f"stage {cur.stage!r} docs_in={cur.docs_in} != "
                f"previous {prev.stage!r} docs_out={prev.docs_out}"
            )
    out = []
    cumulative = Fraction(1)
    for s in stats:
        if s.docs_in == 0:
            step = Fraction(0)
        else:
            step = Fraction(s.docs_out, s.docs_in)
        cumulative *= step
        out.append(StageRate(s.stage, step, cumulative))
    return out


_REQUIRED_FIELDS = ("id", "url", "content")


def write_records(docs: Iterable[Document], sink: IO[bytes]) -> int:
    """Write one JSON line per document. Returns the record count."""
    count = 0
    for doc in docs:
        payload = {
            "id": doc.id,
            "url": doc.url,
            "dump_id": doc.dump_id,
            "part_id": doc.part_id,
            "content": doc.content,
            "annotations": doc.annotations,
        }
        if doc.token_count is not None:
            payload["token_count"] = doc.token_count
        line = json.dumps(payload, ensure_ascii=False) + "\n"
        try:
            sink.write(line.encode("utf-8"))
        except OSError as exc:
            raise SinkError(str(exc)) from exc
        count += 1
    return count


def read_records(source: IO[bytes]) -> Iterator[Document]:
    """Yield documents from a record file, in file order.

    Raises MalformedRecord (with line number) on bad lines and Truncated
    when the final line is missing its newline terminator.
    """
    lineno = 0
    for raw in source:
        lineno += 1
        if not raw.endswith(b"\n"):
            raise Truncated(f"line {lineno} missing newline terminator")
        try:
            obj = json.loads(raw.decode("utf-8"))
        except (UnicodeDecodeError, json.JSONDecodeError) as exc:
            raise MalformedRecord(lineno, str(exc)) from exc
        if not isinstance(obj, dict):
            raise MalformedRecord(lineno, "record is not an object")
        for key in _REQUIRED_FIELDS:
            if key not in obj:
                raise MalformedRecord(lineno, f"missing required field {key!r}")
        if not isinstance(obj["content"], str) or not isinstance(obj["url"], str):
            raise MalformedRecord(lineno, "url/content must be strings")
        yield Document(
            id=str(obj["id"]),
            url=obj["url"],
            content=obj["content"],
            dump_id=str(obj.get("dump_id", "")),
            part_id=int(obj.get("part_id", 0)),
            token_count=obj.get("token_count"),
            annotations=dict(obj.get("annotations", {})),
        )
