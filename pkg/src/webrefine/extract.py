"""Main-content extraction from HTML plus formatting corrections.

The baseline extractor is a readability-style density heuristic: strip
script/style/noscript/comments, score candidate containers by
text length x (1 - link-text fraction), and return the text of the best
subtree. An external extractor can be plugged in via ``external:<command>``
(HTML on stdin, plain text on stdout).
"""
from __future__ import annotations

import re
import shlex
import subprocess
from dataclasses import dataclass, field
from html.parser import HTMLParser
from typing import Optional

_SKIP_TAGS = {"script", "style", "noscript", "template", "svg", "head", "iframe"}
_VOID_TAGS = {
    "area", "base", "br", "col", "embed", "hr", "img", "input",
    "link", "meta", "param", "source", "track", "wbr",
}
_BLOCK_TAGS = {
    "address", "article", "aside", "blockquote", "body", "dd", "div", "dl", "dt",
    "fieldset", "figcaption", "figure", "footer", "form", "h1", "h2", "h3", "h4",
    "h5", "h6", "header", "hr", "li", "main", "nav", "ol", "p", "pre", "section",
    "table", "tbody", "td", "tfoot", "th", "thead", "tr", "ul", "br",
}
_CANDIDATE_TAGS = {"article", "main", "body", "div", "section", "td", "blockquote", "html"}


@dataclass
class _Node:
    tag: str
    children: list = field(default_factory=list)  # _Node or str


class _TreeBuilder(HTMLParser):
    def __init__(self):
        super().__init__(convert_charrefs=True)
        self.root = _Node("#root")
        self.stack = [self.root]
        self.skip_depth = 0

    def handle_starttag(self, tag, attrs):
        if self.skip_depth:
            if tag in _SKIP_TAGS:
                self.skip_depth += 1
            return
        if tag in _SKIP_TAGS:
            self.skip_depth = 1
            return
        node = _Node(tag)
        self.stack[-1].children.append(node)
        if tag not in _VOID_TAGS:
            self.stack.append(node)

    def handle_startendtag(self, tag, attrs):
        if self.skip_depth:
            return
        if tag not in _SKIP_TAGS:
            self.stack[-1].children.append(_Node(tag))

    def handle_endtag(self, tag):
        if self.skip_depth:
            if tag in _SKIP_TAGS:
                self.skip_depth -= 1
            return
        # pop to the matching open tag, tolerating mis-nesting
        for i in range(len(self.stack) - 1, 0, -1):
            if self.stack[i].tag == tag:
                del self.stack[i:]
                return

    def handle_data(self, data):
        if self.skip_depth or not data:
            return
        self.stack[-1].children.append(data)


def _parse(html: str) -> _Node:
    builder = _TreeBuilder()
    try:
        builder.feed(html)
        builder.close()
    except Exception:
        pass  # keep whatever was parsed before the failure
    return builder.root


def _text_stats(node: _Node, in_link: bool = False) -> tuple[int, int]:
    """(total text chars, link text chars) under a node."""
    total = link = 0
    for child in node.children:
        if isinstance(child, str):
            n = len(child.strip())
            total += n
            if in_link:
                link += n
        else:
            t, l = _text_stats(child, in_link or child.tag == "a")
            total += t
            link += l
    return total, link


def _collect_paragraphs(node: _Node, parts: list, buf: list):
    for child in node.children:
        if isinstance(child, str):
            buf.append(child)
        else:
            if child.tag in _BLOCK_TAGS:
                _flush(parts, buf)
                _collect_paragraphs(child, parts, buf)
                _flush(parts, buf)
            else:
                _collect_paragraphs(child, parts, buf)


def _flush(parts: list, buf: list):
    if buf:
        text = re.sub(r"\s+", " ", "".join(buf)).strip()
        if text:
            parts.append(text)
        buf.clear()


def _subtree_text(node: _Node) -> str:
    parts: list[str] = []
    buf: list[str] = []
    _collect_paragraphs(node, parts, buf)
    _flush(parts, buf)
    return "\n".join(parts)


def _candidates(node: _Node, out: list):
    for child in node.children:
        if isinstance(child, _Node):
            if child.tag in _CANDIDATE_TAGS:
                out.append(child)
            _candidates(child, out)


@dataclass
class ExtractionResult:
    text: str
    extractor_id: str
    discarded: bool


def extract_main_content(html: str, extractor: str = "baseline") -> ExtractionResult:
    """Extract the page's main content as newline-separated paragraphs."""
    if extractor.startswith("external:"):
        command = extractor[len("external:"):]
        text = _run_external(command, html)
        text = format_text(text)
        return ExtractionResult(text, extractor, discarded=not text.strip())

    root = _parse(html)
    nodes = [root]
    _candidates(root, nodes)
    best, best_score = root, -1.0
    for node in nodes:
        total, link = _text_stats(node)
        if total == 0:
            continue
        score = total * (1.0 - link / total)
        # ties go to the later (deeper, pre-order) candidate: prefer the
        # specific container over ancestors wrapping it plus pure-link chrome
        if score >= best_score:
            best, best_score = node, score
    text = _subtree_text(best) if best_score > 0 else ""
    return ExtractionResult(text, "baseline", discarded=not text.strip())


def _run_external(command: str, html: str) -> str:
    proc = subprocess.run(
        shlex.split(command),
        input=html.encode("utf-8"),
        stdout=subprocess.PIPE,
        check=True,
    )
    return proc.stdout.decode("utf-8", errors="replace")


# URL-shaped substrings: scheme or www.-prefixed token up to whitespace,
# not consuming trailing punctuation.
_URL_RE = re.compile(r"(?<!\S)(?:https?://|www\.)\S+")
_TRAILING_PUNCT = ".,;:!?)»\"'"


def _strip_url(match: re.Match) -> str:
    token = match.group(0)
    return token[len(token.rstrip(_TRAILING_PUNCT)):]


def format_text(text: str) -> str:
    """Remove URL-shaped substrings, trim line ends, cap newline runs at two."""
    text = _URL_RE.sub(_strip_url, text)
    text = re.sub(r"[ \t\r\f\v]+\n", "\n", text)
    text = re.sub(r"[ \t\r\f\v]+$", "", text)
    text = re.sub(r"\n{3,}", "\n\n", text)
    return text
