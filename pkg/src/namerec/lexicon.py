"""Identifier splitting and verb/noun tagging of method-name words.

Tagging is lexicon driven: a word is a verb when it appears in the verb
lexicon (a plain text file, one word per line), a noun when it is
alphabetic, and ``other`` otherwise.  The default lexicon ships with the
package under ``data/verbs.txt``.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass
from importlib import resources
from pathlib import Path
from typing import Iterable, Optional

VERB = "verb"
NOUN = "noun"
OTHER = "other"


@dataclass(frozen=True)
class WordTag:
    word: str
    tag: str


def _split_chunk(chunk: str) -> list[str]:
    # chunk is purely alphabetic
    words = []
    start = 0
    n = len(chunk)
    for i in range(1, n):
        prev, cur = chunk[i - 1], chunk[i]
        if prev.islower() and cur.isupper():
            words.append(chunk[start:i])
            start = i
        elif (
            prev.isupper()
            and cur.isupper()
            and i + 1 < n
            and chunk[i + 1].islower()
        ):
            # acronym followed by a capitalised word: "HTTPHeader" -> HTTP|Header
            words.append(chunk[start:i])
            start = i
    words.append(chunk[start:])
    return words


def split_identifier(name: str) -> list[str]:
    """Split an identifier into lowercase words.

    Boundaries are camelCase transitions, underscores, dollar signs and
    digits; digits themselves are dropped.  Runs of capitals are kept
    together as one acronym word.

    >>> split_identifier("parseHTTPHeader")
    ['parse', 'http', 'header']
    >>> split_identifier("get_name2")
    ['get', 'name']
    """
    words: list[str] = []
    chunk: list[str] = []
    for ch in name:
        if ch.isalpha():
            chunk.append(ch)
            continue
        if chunk:
            words.extend(_split_chunk("".join(chunk)))
            chunk = []
    if chunk:
        words.extend(_split_chunk("".join(chunk)))
    return [w.lower() for w in words if w]


class Lexicon:
    """A set of verbs loaded from a lexicon file."""

    def __init__(self, verbs: Iterable[str], source: str = "<memory>"):
        self.verbs = frozenset(w.strip().lower() for w in verbs if w.strip())
        self.source = source
        digest = hashlib.sha256("\n".join(sorted(self.verbs)).encode("utf-8"))
        self.hash = digest.hexdigest()

    @classmethod
    def from_text(cls, text: str, source: str = "<memory>") -> "Lexicon":
        verbs = []
        for line in text.splitlines():
            line = line.split("#", 1)[0].strip()
            if line:
                verbs.append(line)
        return cls(verbs, source)

    @classmethod
    def load(cls, path: Optional[str | Path] = None) -> "Lexicon":
        """Load a lexicon file; ``None`` selects the packaged default."""
        if path is None:
            text = (
                resources.files("namerec")
                .joinpath("data/verbs.txt")
                .read_text(encoding="utf-8")
            )
            return cls.from_text(text, "namerec:data/verbs.txt")
        path = Path(path)
        return cls.from_text(path.read_text(encoding="utf-8"), str(path))

    def __contains__(self, word: str) -> bool:
        return word in self.verbs

    def __len__(self) -> int:
        return len(self.verbs)

    def tag(self, word: str) -> WordTag:
        word = word.lower()
        if word in self.verbs:
            return WordTag(word, VERB)
        if word.isalpha():
            return WordTag(word, NOUN)
        return WordTag(word, OTHER)

    def verb_of(self, name: str) -> Optional[str]:
        words = split_identifier(name)
        if words and words[0] in self.verbs:
            return words[0]
        return None

    def nouns_of(self, name: str) -> set[str]:
        return {w for w in split_identifier(name) if self.tag(w).tag == NOUN}


_default: Optional[Lexicon] = None


def default_lexicon() -> Lexicon:
    global _default
    if _default is None:
        _default = Lexicon.load()
    return _default


def tag(word: str, lexicon: Optional[Lexicon] = None) -> WordTag:
    return (lexicon or default_lexicon()).tag(word)


def verb_of(name: str, lexicon: Optional[Lexicon] = None) -> Optional[str]:
    """Return the leading word of ``name`` if it is a lexicon verb."""
    return (lexicon or default_lexicon()).verb_of(name)


def nouns_of(name: str, lexicon: Optional[Lexicon] = None) -> set[str]:
    return (lexicon or default_lexicon()).nouns_of(name)
