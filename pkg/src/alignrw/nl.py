"""Map a natural-language question onto a dictionary key.

The default matcher is lexical: the question is normalized (lowercase,
stopwords removed, light suffix stripping), expanded with a synonym lexicon
and scored against each key's label tokens with Jaccard similarity.  An
external matcher can be plugged in over HTTP; any failure there falls back
to the lexical ranking.
"""

from __future__ import annotations

import json
import logging
import re
import urllib.error
import urllib.request
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Mapping

from .alignment import AlignmentDictionary
from .errors import EmptyQuestionError, NoConfidentMatch
from .expressions import ClassExpression, label_tokens, sort_key

log = logging.getLogger(__name__)

MATCHER_ENV = "ALIGNRW_MATCHER_URL"
EXTERNAL_TIMEOUT = 2.0
ALL_LABELS_BONUS = 0.1

STOPWORDS = frozenset(
    """
    a about above after again against all am an and any are aren as at be because been before being below
    between both but by can cannot could couldn did didn do does doesn doing don down during each few for from
    further had hadn has hasn have haven having he her here hers herself him himself his how i if in into is
    isn it its itself just let me more most my myself no nor not now of off on once only or other ought our
    ours ourselves out over own please same shall she should shouldn so some such than that the their theirs
    them themselves then there these they this those through to too under until up very was wasn we were
    weren what when where which while who whom why will with won would wouldn you your yours yourself
    yourselves s t d ll m re ve
    """.split()
)


def stem(word: str) -> str:
    """Strip ``-ing``, ``-ed``, ``-es`` and ``-s`` until nothing changes.

    A suffix is only removed when at least three letters remain.
    """
    while True:
        before = word
        for suffix in ("ing", "ed"):
            if word.endswith(suffix) and len(word) - len(suffix) >= 3:
                word = word[: -len(suffix)]
                break
        else:
            if word.endswith("es") and len(word) >= 5 and word[-3] in "sxz" or word.endswith(("ches", "shes")):
                word = word[:-2]
            elif word.endswith("s") and not word.endswith(("ss", "us", "is")) and len(word) >= 4:
                word = word[:-1]
        if word == before:
            return word


def content_tokens(words) -> list[str]:
    out: list[str] = []
    for word in words:
        word = word.lower()
        if word in STOPWORDS:
            continue
        word = stem(word)
        if word in STOPWORDS or word in out:
            continue
        out.append(word)
    return out


def _words(text: str) -> list[str]:
    return re.findall(r"[a-z0-9]+", text.lower())


class Lexicon:
    """Synonym groups; every member of a group expands to the whole group."""

    def __init__(self, groups=()):
        self.groups: list[frozenset[str]] = []
        self._index: dict[str, set[str]] = {}
        for group in groups:
            self.add_group(group)

    def add_group(self, words):
        group = frozenset(stem(w.lower()) for w in words if w.strip())
        if len(group) < 2:
            return
        self.groups.append(group)
        for w in group:
            self._index.setdefault(w, set()).update(group)

    def expand(self, tokens) -> set[str]:
        out = set(tokens)
        for t in tokens:
            out |= self._index.get(t, set())
        return out

    @classmethod
    def load(cls, path: str | Path) -> "Lexicon":
        groups = []
        for line in Path(path).read_text(encoding="utf-8").splitlines():
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            groups.append([w for w in re.split(r"\t+", line) if w])
        return cls(groups)

    @classmethod
    def bundled(cls) -> "Lexicon":
        with resources.as_file(resources.files("alignrw") / "data" / "synonyms.tsv") as p:
            return cls.load(p)


@dataclass(frozen=True)
class NormalizedQuestion:
    original: str
    tokens: tuple[str, ...]
    expanded: frozenset[str]


def normalize_question(text: str, lexicon: Lexicon | None = None) -> NormalizedQuestion:
    tokens = content_tokens(_words(text))
    if not tokens:
        raise EmptyQuestionError(f"question has no content words: {text!r}")
    expanded = lexicon.expand(tokens) if lexicon is not None else set(tokens)
    return NormalizedQuestion(text, tuple(tokens), frozenset(expanded))


def key_tokens(key: ClassExpression) -> set[str]:
    """Label tokens of ``key`` passed through the same normalization as questions."""
    return set(content_tokens(sorted(label_tokens(key))))


def _score(expanded: frozenset[str], tokens: set[str]) -> float:
    if not tokens:
        return 0.0
    union = expanded | tokens
    score = len(expanded & tokens) / len(union)
    if tokens <= expanded:
        score = min(1.0, score + ALL_LABELS_BONUS)
    return score


def score_candidates(q: NormalizedQuestion, d: Mapping) -> list[tuple[ClassExpression, float]]:
    ranked = [(key, _score(q.expanded, key_tokens(key))) for key in d]
    ranked.sort(key=lambda ks: (-ks[1], sort_key(ks[0])))
    return ranked


@dataclass
class MatchResult:
    key: ClassExpression
    score: float
    ranked_alternatives: list[tuple[ClassExpression, float]]
    matcher: str = "lexical"
    warnings: list[str] = field(default_factory=list)


def query_external(endpoint: str, q: NormalizedQuestion, keys: list[ClassExpression], timeout: float = EXTERNAL_TIMEOUT):
    """POST the question and candidates to ``endpoint``/match; return ``[(key, score)]``."""
    payload = {
        "question": q.original,
        "candidates": [
            {"id": i, "expression": str(key), "tokens": sorted(key_tokens(key))} for i, key in enumerate(keys)
        ],
    }
    req = urllib.request.Request(
        endpoint.rstrip("/") + "/match",
        data=json.dumps(payload).encode("utf-8"),
        headers={"Content-Type": "application/json"},
        method="POST",
    )
    with urllib.request.urlopen(req, timeout=timeout) as resp:
        body = json.loads(resp.read().decode("utf-8"))
    ranked = []
    for item in body["ranked"]:
        ranked.append((keys[int(item["id"])], float(item["score"])))
    ranked.sort(key=lambda ks: (-ks[1], sort_key(ks[0])))
    return ranked


def match_key(
    q: NormalizedQuestion,
    d: AlignmentDictionary,
    threshold: float = 0.2,
    external: str | None = None,
) -> MatchResult:
    if not 0.0 <= threshold <= 1.0:
        raise ValueError("threshold must lie in [0, 1]")
    warnings = []
    if external:
        keys = list(d)
        try:
            ranked = query_external(external, q, keys)
        except (OSError, ValueError, KeyError, IndexError, TypeError) as exc:
            msg = f"external matcher unavailable ({exc}); using lexical matcher"
            log.warning(msg)
            warnings.append(msg)
        else:
            if ranked and ranked[0][1] >= threshold:
                return MatchResult(ranked[0][0], ranked[0][1], ranked[1:], "external")
            warnings.append("external matcher had no confident match; using lexical matcher")
    ranked = score_candidates(q, d)
    if not ranked or ranked[0][1] < threshold:
        raise NoConfidentMatch(threshold, [(str(k), s) for k, s in ranked[:3]])
    return MatchResult(ranked[0][0], ranked[0][1], ranked[1:], "lexical", warnings)
