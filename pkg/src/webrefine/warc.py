"""Streaming WARC reader and HTML candidate extraction.

Reads WARC/1.0 and WARC/1.1 archives, optionally gzip-compressed
(including concatenated per-record gzip members). Only HTTP response
records with 2xx status and an HTML content type become page candidates;
WET files are deliberately unsupported.
"""
from __future__ import annotations

import gzip
import io
import re
import zlib
from dataclasses import dataclass
from typing import IO, Iterable, Iterator, Optional

from .errors import BadMagic, GzipError, TruncatedRecord

GZIP_MAGIC = b"\x1f\x8b"


@dataclass
class WarcRecord:
    record_type: str
    target_uri: Optional[str]
    http_status: Optional[int]
    content_type: Optional[str]
    payload: bytes
    headers: dict

    @property
    def http_body(self) -> bytes:
        """Body of the HTTP message inside the payload (payload itself if not HTTP)."""
        if self.payload.startswith(b"HTTP/"):
            sep = self.payload.find(b"\r\n\r\n")
            if sep < 0:
                sep = self.payload.find(b"\n\n")
                return self.payload[sep + 2:] if sep >= 0 else b""
            return self.payload[sep + 4:]
        return self.payload


@dataclass
class PageCandidate:
    url: str
    html: str
    http_status: int


class _CountingReader:
    """Wraps a byte stream and tracks the offset consumed so far."""

    def __init__(self, raw: IO[bytes]):
        self.raw = raw
        self.offset = 0

    def read(self, n: int) -> bytes:
        data = self.raw.read(n)
        self.offset += len(data)
        return data

    def readline(self) -> bytes:
        line = self.raw.readline()
        self.offset += len(line)
        return line


def _parse_http_head(payload: bytes) -> tuple[Optional[int], Optional[str]]:
    if not payload.startswith(b"HTTP/"):
        return None, None
    head = payload.split(b"\r\n\r\n", 1)[0]
    lines = head.split(b"\r\n")
    status = None
    parts = lines[0].split(None, 2)
    if len(parts) >= 2 and parts[1].isdigit():
        status = int(parts[1])
    ctype = None
    for line in lines[1:]:
        if b":" in line:
            name, _, value = line.partition(b":")
            if name.strip().lower() == b"content-type":
                ctype = value.strip().decode("latin-1")
    return status, ctype


def iter_warc(source: IO[bytes]) -> Iterator[WarcRecord]:
    """Yield every record of a WARC archive in stream order.

    Header keys are matched case-insensitively; payload bytes are exact
    (Content-Length). Errors carry the byte offset in the (decompressed)
    stream.
    """
    head = source.read(2)
    if not head:
        return
    if head == GZIP_MAGIC:
        stream = _CountingReader(gzip.GzipFile(fileobj=_Rewound(head, source)))
        gzipped = True
    else:
        stream = _CountingReader(_Rewound(head, source))
        gzipped = False

    while True:
        start = stream.offset
        try:
            version = stream.readline()
        except (EOFError, zlib.error, gzip.BadGzipFile) as exc:
            raise GzipError(start, str(exc)) from exc
        if not version:
            return
        if version.strip() == b"":
            continue  # tolerate extra blank lines between records
        if not version.startswith(b"WARC/"):
            raise BadMagic(start)
        headers = {}
        while True:
            try:
                line = stream.readline()
            except (EOFError, zlib.error, gzip.BadGzipFile) as exc:
                raise GzipError(stream.offset, str(exc)) from exc
            if line in (b"\r\n", b"\n"):
                break
            if not line:
                raise TruncatedRecord(stream.offset, "stream ended inside record headers")
            name, _, value = line.partition(b":")
            headers[name.strip().decode("latin-1").lower()] = value.strip().decode("latin-1")
        try:
            length = int(headers.get("content-length", "0"))
        except ValueError:
            raise TruncatedRecord(stream.offset, "bad Content-Length header")
        payload = b""
        try:
            payload = stream.read(length)
        except (EOFError, zlib.error, gzip.BadGzipFile) as exc:
            if gzipped:
                raise GzipError(stream.offset, str(exc)) from exc
            raise
        if len(payload) < length:
            raise TruncatedRecord(stream.offset, f"payload short by {length - len(payload)} bytes")
        # consume the record separator (two CRLFs); tolerate a clean EOF
        for _ in range(2):
            pos = stream.offset
            sep = stream.readline()
            if sep not in (b"", b"\r\n", b"\n"):
                raise TruncatedRecord(pos, "missing record separator")
        status, ctype = _parse_http_head(payload)
        yield WarcRecord(
            record_type=headers.get("warc-type", ""),
            target_uri=headers.get("warc-target-uri"),
            http_status=status,
            content_type=ctype,
            payload=payload,
            headers=headers,
        )


class _Rewound:
    """File-like that replays already-consumed leading bytes."""

    def __init__(self, head: bytes, rest: IO[bytes]):
        self._buf = head
        self._rest = rest

    def read(self, n: int = -1) -> bytes:
        if self._buf:
            if n is None or n < 0:
                out, self._buf = self._buf, b""
                return out + self._rest.read(n)
            out, self._buf = self._buf[:n], self._buf[n:]
            if len(out) < n:
                out += self._rest.read(n - len(out))
            return out
        return self._rest.read(n)

    def readline(self) -> bytes:
        if self._buf:
            idx = self._buf.find(b"\n")
            if idx >= 0:
                out, self._buf = self._buf[: idx + 1], self._buf[idx + 1:]
                return out
            out, self._buf = self._buf, b""
            return out + self._rest.readline()
        return self._rest.readline()


_META_CHARSET_RE = re.compile(
    rb"""<meta[^>]+charset\s*=\s*["']?\s*([a-zA-Z0-9_\-]+)""", re.IGNORECASE
)
_HEADER_CHARSET_RE = re.compile(r"charset\s*=\s*[\"']?([a-zA-Z0-9_\-]+)", re.IGNORECASE)


def _decode_html(body: bytes, content_type: Optional[str]) -> str:
    """Charset detection: HTTP header -> HTML meta tag -> UTF-8 with replacement."""
    charset = None
    if content_type:
        m = _HEADER_CHARSET_RE.search(content_type)
        if m:
            charset = m.group(1)
    if charset is None:
        m = _META_CHARSET_RE.search(body[:4096])
        if m:
            charset = m.group(1).decode("ascii", "ignore")
    if charset:
        try:
            return body.decode(charset, errors="replace")
        except (LookupError, ValueError):
            pass
    return body.decode("utf-8", errors="replace")


def to_candidates(records: Iterable[WarcRecord]) -> Iterator[PageCandidate]:
    """Keep response records with 2xx status and an HTML content type.

    Non-qualifying records are skipped; undecodable payloads fall back to
    replacement characters rather than aborting the stream.
    """
    for rec in records:
        if rec.record_type.lower() != "response":
            continue
        if rec.http_status is None or not (200 <= rec.http_status < 300):
            continue
        ctype = (rec.content_type or "").lower()
        if "html" not in ctype:
            continue
        if not rec.target_uri:
            continue
        yield PageCandidate(
            url=rec.target_uri,
            html=_decode_html(rec.http_body, rec.content_type),
            http_status=rec.http_status,
        )
