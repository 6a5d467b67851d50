"""Query embeddings and cosine nearest-neighbour search."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Iterable, Optional

import numpy as np

from .corpus import SourceUnit, extract_methods
from .embed import EmbeddingTable


SCORE_DECIMALS = 12


class NoKnownCalleesError(ValueError):
    def __init__(self, skipped=()):
        super().__init__("no known callees")
        self.skipped = tuple(skipped)


@dataclass
class RecommendationList:
    entries: list  # (name, score) pairs, best first
    k: int
    skipped: tuple = field(default_factory=tuple)

    @property
    def names(self) -> list[str]:
        return [name for name, _ in self.entries]

    def to_dict(self) -> dict:
        return {
            "candidates": [{"name": n, "score": s} for n, s in self.entries],
            "skipped": list(self.skipped),
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), ensure_ascii=False)


def query_embedding(t: EmbeddingTable, callee_names: Iterable[str]) -> tuple[np.ndarray, tuple[str, ...]]:
    """Mean of the stored vectors of the known callees.

    Unknown callees are reported back (sorted) instead of being imputed.
    Raises :class:`NoKnownCalleesError` when none is known.
    """
    names = sorted(set(callee_names))
    known = [t.index[c] for c in names if c in t.index]
    skipped = tuple(c for c in names if c not in t.index)
    if not known:
        raise NoKnownCalleesError(skipped)
    return t.vectors[known].mean(axis=0), skipped


def cosine(a: np.ndarray, b: np.ndarray) -> float:
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    na, nb = np.linalg.norm(a), np.linalg.norm(b)
    if na == 0 or nb == 0:
        raise ValueError("cosine similarity of a zero-norm vector is undefined")
    return float(np.clip(a @ b / (na * nb), -1.0, 1.0))


class Index:
    """Row-normalised copy of a table for repeated linear-scan queries."""

    def __init__(self, t: EmbeddingTable):
        self.table = t
        norms = np.linalg.norm(t.vectors, axis=1)
        self._unit = np.divide(
            t.vectors, norms[:, None], out=np.zeros_like(t.vectors), where=norms[:, None] > 0
        )
        self._names = np.asarray(t.names, dtype=object)

    def top_k(self, query: np.ndarray, k: int, exclude: Iterable[str] = ()) -> RecommendationList:
        if k < 1:
            raise ValueError("k must be >= 1")
        t = self.table
        if len(t) == 0:
            return RecommendationList([], k)
        query = np.asarray(query, dtype=np.float64)
        qn = np.linalg.norm(query)
        if qn == 0:
            raise ValueError("query vector has zero norm")
        # rounding absorbs float noise so equal cosines tie exactly
        scores = np.round(np.clip(self._unit @ (query / qn), -1.0, 1.0), SCORE_DECIMALS)
        exclude = set(exclude)
        if exclude:
            rows = [t.index[e] for e in exclude if e in t.index]
            scores[rows] = -np.inf
        available = len(t) - len(exclude & set(t.index))
        k_eff = min(k, available)
        if k_eff <= 0:
            return RecommendationList([], k)
        if k_eff < len(scores):
            # every row scoring at least the k-th best, so ties at the cut survive
            kth = np.partition(scores, len(scores) - k_eff)[len(scores) - k_eff]
            cand = np.flatnonzero(scores >= kth)
        else:
            cand = np.arange(len(scores))
        # rows are in lexicographic order, so a stable sort breaks ties by name
        order = cand[np.argsort(-scores[cand], kind="stable")][:k_eff]
        return RecommendationList([(t.names[i], float(scores[i])) for i in order], k)


def top_k(
    t: EmbeddingTable, query: np.ndarray, k: int, exclude: Iterable[str] = ()
) -> RecommendationList:
    """The ``k`` names of ``t`` most cosine-similar to ``query``; ties go
    to the lexicographically smaller name."""
    return Index(t).top_k(query, k, exclude)


def recommend(
    t: EmbeddingTable,
    callee_names: Iterable[str],
    k: int = 10,
    exclude: Iterable[str] = (),
    index: Optional[Index] = None,
) -> RecommendationList:
    query, skipped = query_embedding(t, callee_names)
    result = (index or Index(t)).top_k(query, k, exclude)
    result.skipped = skipped
    return result


def callees_from_snippet(snippet: str) -> set[str]:
    """Callee names of a method body or a whole method definition."""
    records = extract_methods(SourceUnit("<query>", "", snippet))
    if not records:
        wrapped = "class Query__ { void query__() {\n" + snippet + "\n} }"
        records = extract_methods(SourceUnit("<query>", "", wrapped))
    if not records:
        return set()
    return set(records[0].callees)


def parse_query(text: str) -> set[str]:
    """Accept ``{"callees": [...]}`` JSON or a raw source snippet."""
    stripped = text.strip()
    if stripped.startswith("{"):
        try:
            obj = json.loads(stripped)
        except json.JSONDecodeError:
            obj = None
        if isinstance(obj, dict) and "callees" in obj:
            callees = obj["callees"]
            if not isinstance(callees, list) or not all(isinstance(c, str) for c in callees):
                raise ValueError("'callees' must be a list of strings")
            return set(callees)
    return callees_from_snippet(text)
