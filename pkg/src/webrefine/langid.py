"""Character-trigram language scorer and the target-language gate.

The built-in classifier is a small multinomial trigram model trained on
bundled sample text (en/fr/de). It exists so the pipeline is testable
offline; production runs plug an external many-language model through
``ExternalClassifier`` (text in, ``lang<TAB>score`` lines out).
"""
from __future__ import annotations

import math
import re
import shlex
import subprocess
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

from .errors import EmptyText
from .records import RejectReason

DATA_DIR = Path(__file__).parent / "data" / "lang"

DEFAULT_LANGUAGE = "en"
DEFAULT_THRESHOLD = 0.65

# Log-likelihood differences are summed over at most this many trigrams, so
# confidence saturates on long text without drowning out genuinely mixed or
# non-linguistic content.
_TRIGRAM_CAP = 80

_WS_RE = re.compile(r"\s+")


@dataclass
class LanguageScore:
    language: str
    score: float


def _trigrams(text: str) -> list[str]:
    s = " " + _WS_RE.sub(" ", text.strip().lower()) + " "
    return [s[i : i + 3] for i in range(len(s) - 2)]


class TrigramClassifier:
    """Multinomial character-trigram scorer with a shared smoothing floor.

    Unseen-everywhere trigrams contribute the same log-probability to every
    language, so text with no natural-language structure scores close to
    uniform (and falls under any sensible threshold).
    """

    def __init__(self, logprobs: dict[str, dict[str, float]], floor: float):
        self.logprobs = logprobs
        self.floor = floor
        self.languages = sorted(logprobs)

    @classmethod
    def train(cls, samples: dict[str, str]) -> "TrigramClassifier":
        counts = {lang: {} for lang in samples}
        vocab = set()
        for lang, text in samples.items():
            for tri in _trigrams(text):
                counts[lang][tri] = counts[lang].get(tri, 0) + 1
                vocab.add(tri)
        denom = max(sum(c.values()) for c in counts.values()) + len(vocab) + 1
        floor = math.log(1.0 / denom)
        logprobs = {
            lang: {tri: math.log((n + 1) / denom) for tri, n in c.items()}
            for lang, c in counts.items()
        }
        return cls(logprobs, floor)

    @classmethod
    def bundled(cls) -> "TrigramClassifier":
        samples = {}
        for path in sorted(DATA_DIR.glob("*.txt")):
            samples[path.stem] = path.read_text("utf-8")
        return cls.train(samples)

    def classify(self, text: str) -> list[LanguageScore]:
        if not text or not text.strip():
            raise EmptyText("cannot classify empty text")
        tris = _trigrams(text)
        scale = min(1.0, _TRIGRAM_CAP / len(tris))
        lls = {}
        for lang in self.languages:
            table = self.logprobs[lang]
            lls[lang] = scale * sum(table.get(tri, self.floor) for tri in tris)
        top = max(lls.values())
        expd = {lang: math.exp(ll - top) for lang, ll in lls.items()}
        z = sum(expd.values())
        scored = [LanguageScore(lang, expd[lang] / z) for lang in self.languages]
        scored.sort(key=lambda s: (-s.score, s.language))
        return scored


class ExternalClassifier:
    """Adapter for an external model: text on stdin, ``lang<TAB>score`` lines out."""

    def __init__(self, command: str):
        self.command = command

    def classify(self, text: str) -> list[LanguageScore]:
        if not text or not text.strip():
            raise EmptyText("cannot classify empty text")
        proc = subprocess.run(
            shlex.split(self.command),
            input=text.encode("utf-8"),
            stdout=subprocess.PIPE,
            check=True,
        )
        scored = []
        for line in proc.stdout.decode("utf-8").splitlines():
            if not line.strip():
                continue
            lang, _, score = line.partition("\t")
            scored.append(LanguageScore(lang.strip(), float(score)))
        scored.sort(key=lambda s: (-s.score, s.language))
        return scored


@dataclass
class LanguageVerdict:
    kept: bool
    reason: Optional[RejectReason]
    top: LanguageScore


def language_gate(
    text: str,
    classifier,
    target: str = DEFAULT_LANGUAGE,
    threshold: float = DEFAULT_THRESHOLD,
) -> LanguageVerdict:
    """Keep iff the top language is the target and scores at least the threshold.

    A score under the threshold signals no identifiable natural text, so it
    takes precedence over a language mismatch.
    """
    top = classifier.classify(text)[0]
    if top.score < threshold:
        return LanguageVerdict(False, RejectReason.LANGUAGE_SCORE, top)
    if top.language != target:
        return LanguageVerdict(False, RejectReason.LANGUAGE_MISMATCH, top)
    return LanguageVerdict(True, None, top)
