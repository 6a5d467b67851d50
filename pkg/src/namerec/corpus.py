"""Lexical extraction of method definitions and their callee names.

No semantic analysis is attempted: comments and literals are blanked,
the remaining text is tokenised, and method definitions are recognised
by shape (``Type name(...) [throws ...] {``) at class-member depth.
Every ``name(`` inside a definition body, other than keywords,
constructor calls and annotations, is a callee.
"""

from __future__ import annotations

import json
import logging
import os
import re
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import IO, Iterable, Optional, Sequence

logger = logging.getLogger(__name__)

DEFAULT_EXTENSIONS = (".java",)
DEFAULT_PACKAGE_PATTERN = r"\bpackage\s+([^\W\d][\w$]*(?:\s*\.\s*[^\W\d][\w$]*)*)\s*;"

JAVA_KEYWORDS = frozenset(
    """
    abstract assert boolean break byte case catch char class const continue
    default do double else enum extends final finally float for goto if
    implements import instanceof int interface long native new package
    private protected public return short static strictfp super switch
    synchronized this throw throws transient try void volatile while
    true false null
    """.split()
)
PRIMITIVES = frozenset("boolean byte char short int long float double void".split())
MODIFIERS = frozenset(
    """
    public private protected static final abstract synchronized native
    strictfp transient volatile default sealed
    """.split()
)
CLASS_KEYWORDS = frozenset({"class", "interface", "enum"})


@dataclass(frozen=True)
class SourceUnit:
    path: str
    package_name: str
    text: str


@dataclass(frozen=True)
class MethodRecord:
    name: str
    package_name: str
    path: str
    callees: frozenset = field(default_factory=frozenset)

    def to_json(self) -> str:
        obj = {
            "name": self.name,
            "package": self.package_name,
            "path": self.path,
            "callees": sorted(self.callees),
        }
        return json.dumps(obj, ensure_ascii=False)

    @classmethod
    def from_json(cls, line: str) -> "MethodRecord":
        obj = json.loads(line)
        return cls(obj["name"], obj["package"], obj["path"], frozenset(obj["callees"]))


# ---------------------------------------------------------------------------
# Lexing
# ---------------------------------------------------------------------------


def strip_comments_and_literals(text: str) -> str:
    """Blank out comments, string, text-block and char literals.

    Every removed character becomes a space except newlines, so offsets
    and line numbers are preserved.
    """
    out = list(text)
    n = len(text)
    i = 0

    def blank(a: int, b: int) -> None:
        for k in range(a, min(b, n)):
            if out[k] != "\n":
                out[k] = " "

    while i < n:
        c = text[i]
        if c == "/" and i + 1 < n and text[i + 1] == "/":
            j = text.find("\n", i)
            j = n if j < 0 else j
            blank(i, j)
            i = j
        elif c == "/" and i + 1 < n and text[i + 1] == "*":
            j = text.find("*/", i + 2)
            j = n if j < 0 else j + 2
            blank(i, j)
            i = j
        elif text.startswith('"""', i):
            j = i + 3
            while j < n and not text.startswith('"""', j):
                j += 2 if text[j] == "\\" else 1
            j = min(n, j + 3)
            blank(i, j)
            i = j
        elif c == '"' or c == "'":
            j = i + 1
            while j < n and text[j] != c and text[j] != "\n":
                j += 2 if text[j] == "\\" else 1
            j = min(n, j + 1)
            blank(i, j)
            i = j
        else:
            i += 1
    return "".join(out)


_TOKEN_RE = re.compile(
    r"""
    (?P<ident>[^\W\d][\w$]*|\$[\w$]*)
  | (?P<number>\d[\w.]*)
  | (?P<punct>::|->|[^\s\w])
    """,
    re.VERBOSE,
)


@dataclass(frozen=True)
class _Tok:
    text: str
    pos: int
    ident: bool


def _tokenize(stripped: str) -> list[_Tok]:
    toks = []
    for m in _TOKEN_RE.finditer(stripped):
        kind = m.lastgroup
        if kind == "number":
            continue
        toks.append(_Tok(m.group(), m.start(), kind == "ident"))
    return toks


def _match_parens(toks: Sequence[_Tok]) -> dict[int, int]:
    match = {}
    stack = []
    for i, t in enumerate(toks):
        if t.text == "(":
            stack.append(i)
        elif t.text == ")" and stack:
            match[stack.pop()] = i
    return match


def _line_of(text: str, pos: int) -> int:
    return text.count("\n", 0, pos) + 1


# ---------------------------------------------------------------------------
# Scanning
# ---------------------------------------------------------------------------


def parse_package(text: str, pattern: str = DEFAULT_PACKAGE_PATTERN) -> str:
    m = re.search(pattern, strip_comments_and_literals(text))
    if not m:
        return ""
    return re.sub(r"\s+", "", m.group(1))


def scan_corpus(
    root: str | os.PathLike,
    extensions: Sequence[str] = DEFAULT_EXTENSIONS,
    package_pattern: str = DEFAULT_PACKAGE_PATTERN,
    skipped: Optional[list[str]] = None,
) -> list[SourceUnit]:
    """Read every source file under ``root`` in lexicographic path order.

    Files that cannot be decoded as UTF-8 are skipped; their relative
    paths are appended to ``skipped`` when a list is given.
    """
    root = Path(root)
    if not root.is_dir():
        raise FileNotFoundError(f"corpus root is not a readable directory: {root}")
    exts = tuple(e.lower() for e in extensions)
    paths = []
    for dirpath, _dirnames, filenames in os.walk(root):
        for fn in filenames:
            if fn.lower().endswith(exts):
                full = Path(dirpath) / fn
                paths.append((full.relative_to(root).as_posix(), full))
    paths.sort(key=lambda p: p[0])

    units = []
    n_skipped = 0
    for rel, full in paths:
        try:
            text = full.read_bytes().decode("utf-8")
        except (UnicodeDecodeError, OSError) as exc:
            n_skipped += 1
            logger.warning("skipping %s: %s", rel, exc)
            if skipped is not None:
                skipped.append(rel)
            continue
        units.append(SourceUnit(rel, parse_package(text, package_pattern), text))
    if n_skipped:
        logger.warning("%d file(s) skipped while scanning %s", n_skipped, root)
    return units


# ---------------------------------------------------------------------------
# Method extraction
# ---------------------------------------------------------------------------


def _type_like(tok: Optional[_Tok]) -> bool:
    if tok is None:
        return False
    if tok.text in ("]", ">"):
        return True
    if not tok.ident:
        return False
    if tok.text in PRIMITIVES:
        return True
    return tok.text not in JAVA_KEYWORDS and tok.text not in MODIFIERS


def _chain_start(toks: Sequence[_Tok], i: int) -> int:
    """Index of the first token of a dotted name ending at ``i``."""
    j = i
    while j >= 2 and toks[j - 1].text == "." and toks[j - 2].ident:
        j -= 2
    return j


def _skip_throws(toks: Sequence[_Tok], k: int) -> int:
    if k < len(toks) and toks[k].text == "throws":
        k += 1
        while k < len(toks) and (toks[k].ident or toks[k].text in ".,<>?&"):
            k += 1
    return k


class _Frame:
    __slots__ = ("kind", "name", "owner")

    def __init__(self, kind: str, name: Optional[str], owner: Optional[int]):
        self.kind = kind  # top | class | method | block
        self.name = name
        self.owner = owner


def extract_methods(
    unit: SourceUnit, diagnostics: Optional[list[str]] = None
) -> list[MethodRecord]:
    """Extract one :class:`MethodRecord` per method definition in ``unit``.

    Records appear in definition order.  Constructors and initializer
    blocks produce no record.  Calls made inside a nested method (for
    instance in an anonymous class) belong to that nested method only.
    On unbalanced braces the longest consistent prefix is kept and a
    message is appended to ``diagnostics``.
    """
    stripped = strip_comments_and_literals(unit.text)
    toks = _tokenize(stripped)
    parens = _match_parens(toks)
    n = len(toks)

    anon_braces = set()
    for i, t in enumerate(toks):
        if t.text != "new":
            continue
        j = i + 1
        while j < n and toks[j].text not in ("(", "[", "{", ";", ")"):
            j += 1
        if j < n and toks[j].text == "(" and j in parens:
            close = parens[j]
            if close + 1 < n and toks[close + 1].text == "{":
                anon_braces.add(close + 1)

    names: list[str] = []
    callees: list[set] = []
    closed: list[bool] = []
    stack = [_Frame("top", None, None)]
    pending_class: Optional[str] = None
    pending_method: Optional[tuple[int, Optional[int]]] = None  # (brace index, record)

    def note(msg: str) -> None:
        logger.warning("%s: %s", unit.path, msg)
        if diagnostics is not None:
            diagnostics.append(f"{unit.path}: {msg}")

    i = 0
    while i < n:
        t = toks[i]
        prev = toks[i - 1] if i > 0 else None
        text = t.text

        if text == "{":
            top = stack[-1]
            if pending_method is not None and pending_method[0] == i:
                stack.append(_Frame("method", None, pending_method[1]))
                pending_method = None
            elif pending_class is not None:
                stack.append(_Frame("class", pending_class, None))
                pending_class = None
            elif i in anon_braces:
                stack.append(_Frame("class", None, None))
            elif (
                top.kind in ("class", "top")
                and prev is not None
                and (prev.text == ")" or (prev.ident and prev.text not in JAVA_KEYWORDS))
            ):
                # enum constant body
                stack.append(_Frame("class", None, None))
            else:
                stack.append(_Frame("block", None, top.owner))
            i += 1
            continue

        if text == "}":
            if len(stack) == 1:
                note(f"unbalanced '}}' at line {_line_of(stripped, t.pos)}; "
                     "ignoring the rest of the file")
                break
            frame = stack.pop()
            if frame.kind == "method" and frame.owner is not None:
                closed[frame.owner] = True
            i += 1
            continue

        if text == ";":
            pending_class = None
            i += 1
            continue

        if not t.ident:
            i += 1
            continue

        if text in CLASS_KEYWORDS and (prev is None or prev.text != "."):
            if i + 1 < n and toks[i + 1].ident:
                pending_class = toks[i + 1].text
            i += 1
            continue
        if (
            text == "record"
            and stack[-1].kind in ("class", "top")
            and i + 2 < n
            and toks[i + 1].ident
            and toks[i + 2].text in ("(", "<")
        ):
            pending_class = toks[i + 1].text
            i += 2
            continue

        if i + 1 >= n or toks[i + 1].text != "(" or text in JAVA_KEYWORDS:
            i += 1
            continue

        # identifier followed by '('
        frame = stack[-1]
        if frame.kind in ("class", "top") and pending_class is None:
            close = parens.get(i + 1)
            if close is not None:
                k = _skip_throws(toks, close + 1)
                if k < n and toks[k].text == "{":
                    enclosing = next(
                        (f.name for f in reversed(stack) if f.kind == "class"), None
                    )
                    if text == enclosing:
                        pending_method = (k, None)  # constructor
                        i = k
                        continue
                    if _type_like(prev):
                        names.append(text)
                        callees.append(set())
                        closed.append(False)
                        pending_method = (k, len(names) - 1)
                        i = k
                        continue
            i += 1
            continue

        if frame.owner is not None:
            start = _chain_start(toks, i)
            before = toks[start - 1].text if start > 0 else None
            if before not in ("new", "@"):
                callees[frame.owner].add(text)
        i += 1

    if len(stack) > 1:
        dropped = sum(
            1 for f in stack if f.kind == "method" and f.owner is not None
        )
        note(f"unbalanced '{{': {len(stack) - 1} block(s) left open at end of file"
             + (f"; dropping {dropped} unterminated method(s)" if dropped else ""))

    return [
        MethodRecord(name, unit.package_name, unit.path, frozenset(cs))
        for name, cs, ok in zip(names, callees, closed)
        if ok
    ]


def _extract_pair(unit: SourceUnit) -> tuple[SourceUnit, list[MethodRecord]]:
    return unit, extract_methods(unit)


def extract_corpus(
    units: Iterable[SourceUnit], workers: int = 1
) -> list[tuple[SourceUnit, list[MethodRecord]]]:
    """Extract every unit; with ``workers > 1`` files are processed in
    parallel and the result is re-sorted by path."""
    units = list(units)
    if workers > 1 and len(units) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            pairs = list(pool.map(_extract_pair, units, chunksize=16))
    else:
        pairs = [_extract_pair(u) for u in units]
    pairs.sort(key=lambda p: p[0].path)
    return pairs


# ---------------------------------------------------------------------------
# Cleansing
# ---------------------------------------------------------------------------

_SERIAL_RE = re.compile(r"^([^\W\d_]+)(\d+)$")


def is_test_package(package_name: str) -> bool:
    return "test" in package_name.lower()


def is_serial_numbered(names: Sequence[str]) -> bool:
    """True when >= 3 names all share one alphabetic base plus an integer
    suffix, like ``get0, get1, ..., get100``."""
    if len(names) < 3:
        return False
    bases = set()
    for name in names:
        m = _SERIAL_RE.match(name)
        if not m:
            return False
        bases.add(m.group(1))
        if len(bases) > 1:
            return False
    return True


def cleanse(
    extracted: Sequence[tuple[SourceUnit, list[MethodRecord]]],
) -> tuple[list[tuple[SourceUnit, list[MethodRecord]]], dict[str, int]]:
    """Drop test-package files and files made only of serially numbered
    methods.  Returns the kept pairs and per-rule drop counts."""
    kept = []
    dropped = {"test_package": 0, "serial_numbered": 0}
    for unit, records in extracted:
        if is_test_package(unit.package_name):
            dropped["test_package"] += 1
        elif is_serial_numbered([r.name for r in records]):
            dropped["serial_numbered"] += 1
        else:
            kept.append((unit, records))
    return kept, dropped


# ---------------------------------------------------------------------------
# JSON Lines
# ---------------------------------------------------------------------------


def write_records(records: Iterable[MethodRecord], fp: IO[str]) -> int:
    count = 0
    for r in records:
        fp.write(r.to_json())
        fp.write("\n")
        count += 1
    return count


def read_records(fp: IO[str]) -> list[MethodRecord]:
    records = []
    for lineno, line in enumerate(fp, 1):
        if not line.strip():
            continue
        try:
            records.append(MethodRecord.from_json(line))
        except (ValueError, KeyError, TypeError) as exc:
            raise ValueError(f"malformed record on line {lineno}: {exc}") from exc
    return records
