"""Cross-validated evaluation of name recommendations.

Test methods are grouped into three categories by how much naming hint
their query carries: getters/setters, methods whose callee words contain
the correct verb (noun), and methods whose callee words do not.  A
recommendation is correct when any of the top-k candidate names shares
the target's verb (verb task) or one of its nouns (noun task).
"""

from __future__ import annotations

import csv
import io
import json
import logging
from collections import Counter
from dataclasses import dataclass, field
from typing import Iterable, Optional, Sequence

import numpy as np

from .acg import build_acg
from .corpus import MethodRecord, SourceUnit
from .embed import EmbeddingTable, TrainConfig, train
from .lexicon import Lexicon, default_lexicon, split_identifier
from .recommend import Index, NoKnownCalleesError, query_embedding

logger = logging.getLogger(__name__)

GETTER_SETTER = "getter_setter"
HINT_PRESENT = "hint_present"
HINT_ABSENT = "hint_absent"
CATEGORIES = (GETTER_SETTER, HINT_PRESENT, HINT_ABSENT)
TASKS = ("verb", "noun")
EXCLUSIONS = ("no_callees", "no_known_callees", "no_verb", "no_noun")


# ---------------------------------------------------------------------------
# Folds and categories
# ---------------------------------------------------------------------------


def split_folds(units: Sequence, k: int, seed: int) -> list[list]:
    """Shuffle with ``seed`` and deal units round-robin into ``k`` folds."""
    if k < 2:
        raise ValueError("need at least 2 folds")
    if len(units) < k:
        raise ValueError(f"{len(units)} units cannot fill {k} folds")
    order = np.random.default_rng(seed).permutation(len(units))
    folds: list[list] = [[] for _ in range(k)]
    for pos, i in enumerate(order):
        folds[pos % k].append(units[i])
    return folds


def query_words(callees: Iterable[str]) -> set[str]:
    words = set()
    for c in callees:
        words.update(split_identifier(c))
    return words


def categorize(m: MethodRecord, task: str, lexicon: Optional[Lexicon] = None) -> str:
    lexicon = lexicon or default_lexicon()
    if task not in TASKS:
        raise ValueError(f"unknown task {task!r}")
    verb = lexicon.verb_of(m.name)
    if verb in ("get", "set"):
        return GETTER_SETTER
    words = query_words(m.callees)
    if task == "verb":
        hit = verb is not None and verb in words
    else:
        hit = bool(lexicon.nouns_of(m.name) & words)
    return HINT_PRESENT if hit else HINT_ABSENT


# ---------------------------------------------------------------------------
# Reports
# ---------------------------------------------------------------------------


def _empty_cells() -> dict:
    return {task: {c: [0, 0] for c in CATEGORIES} for task in TASKS}


@dataclass
class FoldResult:
    cells: dict = field(default_factory=_empty_cells)  # task -> category -> [correct, total]
    exclusions: Counter = field(default_factory=Counter)
    methods: int = 0
    per_verb: dict = field(default_factory=dict)  # verb -> [correct, total]

    def add(self, task: str, category: str, correct: bool) -> None:
        cell = self.cells[task][category]
        cell[0] += int(correct)
        cell[1] += 1


def _cell(correct: int, total: int) -> dict:
    return {"correct": correct, "total": total, "ratio": (correct / total) if total else None}


@dataclass
class EvaluationReport:
    folds: list  # FoldResult per fold
    config: dict = field(default_factory=dict)
    cleansing: dict = field(default_factory=dict)
    verb_frequency: dict = field(default_factory=dict)

    def totals(self, task: str, category: str) -> tuple[int, int]:
        correct = sum(f.cells[task][category][0] for f in self.folds)
        total = sum(f.cells[task][category][1] for f in self.folds)
        return correct, total

    def exclusions(self) -> Counter:
        out = Counter({e: 0 for e in EXCLUSIONS})
        for f in self.folds:
            out.update(f.exclusions)
        return out

    def _task_block(self, cells_of) -> dict:
        block = {}
        for task in TASKS:
            cells = cells_of(task)
            merged = [cells[HINT_PRESENT][0] + cells[HINT_ABSENT][0],
                      cells[HINT_PRESENT][1] + cells[HINT_ABSENT][1]]
            overall = [merged[0] + cells[GETTER_SETTER][0], merged[1] + cells[GETTER_SETTER][1]]
            entry = {c: _cell(*cells[c]) for c in CATEGORIES}
            entry["non_getter_setter"] = _cell(*merged)
            entry["all"] = _cell(*overall)
            block[task] = entry
        return block

    def to_dict(self) -> dict:
        folds = []
        for i, f in enumerate(self.folds):
            folds.append({
                "fold": i,
                "methods": f.methods,
                "tasks": self._task_block(lambda task, f=f: f.cells[task]),
                "exclusions": {e: f.exclusions.get(e, 0) for e in EXCLUSIONS},
            })
        tasks = self._task_block(
            lambda task: {c: list(self.totals(task, c)) for c in CATEGORIES}
        )
        categories = {
            c: {task: tasks[task][c] for task in TASKS}
            for c in CATEGORIES + ("non_getter_setter", "all")
        }
        excl = self.exclusions()
        return {
            "config": self.config,
            "methods": sum(f.methods for f in self.folds),
            "folds": folds,
            "tasks": tasks,
            "categories": categories,
            "exclusions": {e: excl[e] for e in EXCLUSIONS},
            "cleansing": self.cleansing,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, ensure_ascii=False) + "\n"

    def to_text(self) -> str:
        """Plain-text tables, one per task, in the usual percent (n / d) form."""

        def fmt(c: int, t: int) -> str:
            return f"{100.0 * c / t:6.2f}% ({c} / {t})" if t else f"{'n/a':>7} (0 / 0)"

        out = []
        for task in TASKS:
            heads = ["getter/setter", f"contains any of correct {task}s",
                     f"contains no correct {task}s"]
            rows = []
            for i, f in enumerate(self.folds):
                rows.append([f"part{i + 1}"] + [fmt(*f.cells[task][c]) for c in CATEGORIES])
            rows.append(["Total"] + [fmt(*self.totals(task, c)) for c in CATEGORIES])
            widths = [max(len(r[j]) for r in rows + [[""] + heads]) for j in range(4)]
            out.append(f"Correctness of recommendation for {task} part")
            out.append(" | ".join(h.ljust(w) for h, w in zip([""] + heads, widths)).rstrip())
            out.append("-+-".join("-" * w for w in widths))
            for r in rows:
                out.append(" | ".join(x.ljust(w) for x, w in zip(r, widths)).rstrip())
            d = self.to_dict()["tasks"][task]
            out.append(f"methods except for getter/setter: {fmt(d['non_getter_setter']['correct'], d['non_getter_setter']['total'])}")
            out.append(f"all methods: {fmt(d['all']['correct'], d['all']['total'])}")
            out.append("")
        excl = self.exclusions()
        out.append("excluded: " + ", ".join(f"{e}={excl[e]}" for e in EXCLUSIONS))
        return "\n".join(out) + "\n"

    def per_verb_csv(self) -> str:
        stats: dict = {}
        for f in self.folds:
            for verb, (c, t) in f.per_verb.items():
                s = stats.setdefault(verb, [0, 0])
                s[0] += c
                s[1] += t
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["verb", "frequency", "correct", "total", "correctness"])
        for verb in sorted(stats):
            c, t = stats[verb]
            w.writerow([verb, self.verb_frequency.get(verb, 0), c, t, f"{c / t:.6f}"])
        return buf.getvalue()


# ---------------------------------------------------------------------------
# Scoring
# ---------------------------------------------------------------------------


def evaluate(
    table: EmbeddingTable,
    test_methods: Iterable[MethodRecord],
    k: int = 10,
    lexicon: Optional[Lexicon] = None,
    index: Optional[Index] = None,
) -> FoldResult:
    """Score every test method against ``table``.

    Methods without callees, or whose callees are all unknown to the
    table, are counted in the exclusions; methods without a verb (noun)
    are excluded from the verb (noun) task only.
    """
    lexicon = lexicon or default_lexicon()
    index = index or Index(table)
    result = FoldResult()
    verb_cache: dict = {}
    noun_cache: dict = {}

    def verb(name):
        if name not in verb_cache:
            verb_cache[name] = lexicon.verb_of(name)
        return verb_cache[name]

    def nouns(name):
        if name not in noun_cache:
            noun_cache[name] = lexicon.nouns_of(name)
        return noun_cache[name]

    for m in test_methods:
        result.methods += 1
        if not m.callees:
            result.exclusions["no_callees"] += 1
            continue
        try:
            query, _ = query_embedding(table, m.callees)
        except NoKnownCalleesError:
            result.exclusions["no_known_callees"] += 1
            continue
        if not np.any(query):
            result.exclusions["no_known_callees"] += 1
            continue
        candidates = index.top_k(query, k).names

        target_verb = verb(m.name)
        if target_verb is None:
            result.exclusions["no_verb"] += 1
        else:
            ok = any(verb(c) == target_verb for c in candidates)
            result.add("verb", categorize(m, "verb", lexicon), ok)
            pv = result.per_verb.setdefault(target_verb, [0, 0])
            pv[0] += int(ok)
            pv[1] += 1

        target_nouns = nouns(m.name)
        if not target_nouns:
            result.exclusions["no_noun"] += 1
        else:
            ok = any(nouns(c) & target_nouns for c in candidates)
            result.add("noun", categorize(m, "noun", lexicon), ok)
    return result


def cross_validate(
    extracted: Sequence[tuple[SourceUnit, list[MethodRecord]]],
    folds: int = 5,
    seed: int = 0,
    train_config: Optional[TrainConfig] = None,
    k: int = 10,
    lexicon: Optional[Lexicon] = None,
) -> tuple[EvaluationReport, list[EmbeddingTable]]:
    """File-level k-fold cross validation over extracted (cleansed) units.

    Returns the report and the table trained for each fold.
    """
    cfg = train_config or TrainConfig()
    lexicon = lexicon or default_lexicon()
    parts = split_folds(list(extracted), folds, seed)
    results = []
    tables = []
    for i, test_part in enumerate(parts):
        train_records = [
            r
            for j, part in enumerate(parts) if j != i
            for _unit, records in sorted(part, key=lambda p: p[0].path)
            for r in records
        ]
        test_records = [
            r for _unit, records in sorted(test_part, key=lambda p: p[0].path) for r in records
        ]
        g = build_acg(train_records)
        if len(g) == 0:
            raise ValueError(f"fold {i}: training folds contain no methods")
        table = train(g, cfg).table
        logger.info("fold %d: %d train nodes, %d test methods", i, len(g), len(test_records))
        results.append(evaluate(table, test_records, k, lexicon))
        tables.append(table)

    freq = Counter()
    for _unit, records in extracted:
        for r in records:
            v = lexicon.verb_of(r.name)
            if v is not None:
                freq[v] += 1
    report = EvaluationReport(results, verb_frequency=dict(freq))
    return report, tables


# ---------------------------------------------------------------------------
# Synthetic corpus
# ---------------------------------------------------------------------------

FAMILY_VERBS = [
    "get", "load", "save", "render", "parse", "send", "merge", "encode",
    "validate", "schedule", "compress", "publish", "resolve", "dispatch",
    "normalize", "export", "import", "convert", "register", "notify",
]
FAMILY_NOUNS = [
    "Config", "Invoice", "Image", "Message", "Profile", "Report", "Route",
    "Session", "Order", "Document", "Account", "Payload", "Template",
    "Channel", "Record", "Metric", "Asset", "Catalog", "Ticket", "Widget",
]
QUALIFIERS = [
    "", "All", "Async", "Batch", "Cached", "Checked", "Default", "Direct",
    "Eager", "Fast", "Full", "Internal", "Lazy", "Local", "Quiet", "Raw",
    "Remote", "Safe", "Shared", "Simple", "Strict", "Sync", "Temp", "Twice",
]
HELPER_VERBS = [
    "read", "write", "open", "close", "check", "compute", "format", "find",
    "fetch", "apply", "build", "clear", "copy", "emit", "flush", "lock",
    "match", "pack", "scan", "trim", "wrap", "split", "sort", "touch",
]
POOL_NOUNS = [
    "Buffer", "Socket", "Token", "Pixel", "Ledger", "Cursor", "Packet",
    "Vertex", "Thread", "Schema", "Column", "Header", "Stream", "Matrix",
    "Frame", "Bucket", "Segment", "Cipher", "Glyph", "Queue",
]


def _nth(words: Sequence[str], i: int) -> str:
    if i < len(words):
        return words[i]
    q, r = divmod(i, len(words))
    return words[r] + _nth(words, q - 1).capitalize()


@dataclass
class SyntheticFamily:
    verb: str
    noun: str
    methods: list
    pool: list


@dataclass
class SyntheticPlan:
    families: list  # SyntheticFamily
    planted: dict  # method name -> frozenset of callee names
    files: dict  # path -> list of method names
    package: str

    def family_of(self) -> dict:
        out = {}
        for i, fam in enumerate(self.families):
            for name in fam.methods + fam.pool:
                out[name] = i
        return out


def plan_synthetic_corpus(
    families: int,
    methods_per_family: int,
    callee_pool_size: int,
    seed: int,
    methods_per_file: int = 5,
    callees_per_method: tuple = (3, 6),
    package: str = "org.synth.gen",
) -> SyntheticPlan:
    """The ground truth behind :func:`generate_synthetic_corpus`."""
    if families < 2:
        raise ValueError("need at least 2 families")
    if methods_per_family < 1 or callee_pool_size < 1 or methods_per_file < 1:
        raise ValueError("sizes must be positive")
    rng = np.random.default_rng(seed)
    lo, hi = callees_per_method
    lo, hi = max(1, min(lo, callee_pool_size)), max(1, min(hi, callee_pool_size))

    fams = []
    planted = {}
    for f in range(families):
        verb = _nth(FAMILY_VERBS, f)
        noun = _nth(FAMILY_NOUNS, f)
        methods = [verb + noun + _nth(QUALIFIERS, j) for j in range(methods_per_family)]
        pool_noun = _nth(POOL_NOUNS, f)
        pool = [_nth(HELPER_VERBS, j) + pool_noun for j in range(callee_pool_size)]
        # one helper per family reuses the family verb, so some queries carry the hint
        pool[0] = verb + pool_noun + "Impl"
        fams.append(SyntheticFamily(verb, noun, methods, pool))
        for name in methods:
            size = int(rng.integers(lo, hi + 1))
            picks = rng.choice(callee_pool_size, size=size, replace=False)
            planted[name] = frozenset(pool[p] for p in picks)

    all_methods = [m for fam in fams for m in fam.methods]
    order = rng.permutation(len(all_methods))
    n_files = -(-len(all_methods) // methods_per_file)
    width = max(3, len(str(n_files)))
    pkg_dir = package.replace(".", "/")
    files = {}
    for fi in range(n_files):
        chunk = order[fi * methods_per_file : (fi + 1) * methods_per_file]
        files[f"{pkg_dir}/Unit{fi:0{width}d}.java"] = [all_methods[i] for i in chunk]
    return SyntheticPlan(fams, planted, files, package)


_RETURNS = [
    ("void", None),
    ("int", "0"),
    ("String", "s"),
    ("java.util.List<String>", "null"),
    ("boolean", "a > 1"),
]


def _render_method(name: str, callees: Sequence[str], rng: np.random.Generator) -> list[str]:
    rtype, rval = _RETURNS[int(rng.integers(len(_RETURNS)))]
    lines = [f"    public {rtype} {name}(int a, String s) {{"]
    lines.append(f"        // {name} must not call notPlanted() here")
    lines.append(f'        String msg = "decoy(" + s + "{callees[0]}()";')
    for i, c in enumerate(callees):
        style = int(rng.integers(5))
        if style == 0:
            lines.append(f"        {c}(a);")
        elif style == 1:
            lines.append(f"        helper.{c}(s, a);")
        elif style == 2:
            lines.append("        if (a > 0) {")
            lines.append(f"            this.{c}(msg);")
            lines.append("        }")
        elif style == 3:
            lines.append("        for (int i = 0; i < a; i++) {")
            lines.append(f"            Helper h = new Helper(i); h.{c}(i);")
            lines.append("        }")
        else:
            lines.append(f"        Object r{i} = {c}(new Helper(a), 'x'); /* {c}Ghost() */")
    if rval is not None:
        lines.append(f"        return {rval};")
    lines.append("    }")
    return lines


def render_synthetic_corpus(plan: SyntheticPlan, seed: int) -> list[SourceUnit]:
    rng = np.random.default_rng([seed, 2])
    units = []
    for path in sorted(plan.files):
        cls = path.rsplit("/", 1)[1][: -len(".java")]
        lines = [
            f"package {plan.package};",
            "",
            "import java.util.List;",
            "",
            f"/** Generated unit {cls}; see helperCall() notes. */",
            f"public class {cls} {{",
            "    private final Helper helper = new Helper(0);",
            "",
            f"    public {cls}() {{",
            "        init();",
            "    }",
        ]
        for name in plan.files[path]:
            lines.append("")
            lines.extend(_render_method(name, sorted(plan.planted[name]), rng))
        lines.append("}")
        units.append(SourceUnit(path, plan.package, "\n".join(lines) + "\n"))
    return units


def generate_synthetic_corpus(
    families: int,
    methods_per_family: int,
    callee_pool_size: int,
    seed: int,
    **kwargs,
) -> list[SourceUnit]:
    """Source files where each family's methods share a verb+noun naming
    scheme and call only names from a family-private pool."""
    plan = plan_synthetic_corpus(families, methods_per_family, callee_pool_size, seed, **kwargs)
    return render_synthetic_corpus(plan, seed)


def write_units(units: Iterable[SourceUnit], root) -> None:
    from pathlib import Path

    root = Path(root)
    for u in units:
        target = root / u.path
        target.parent.mkdir(parents=True, exist_ok=True)
        target.write_text(u.text, encoding="utf-8", newline="\n")


# ---------------------------------------------------------------------------
# Family recall on a synthetic corpus
# ---------------------------------------------------------------------------


def random_family_hit_probability(table_size: int, same_family: int, k: int) -> float:
    """Probability that k names drawn uniformly without replacement from
    ``table_size`` candidates include at least one of ``same_family``."""
    from math import comb

    others = table_size - same_family
    if k > table_size:
        k = table_size
    return 1.0 - comb(others, k) / comb(table_size, k)


def held_out_family_recall(
    plan: SyntheticPlan,
    records: Sequence[MethodRecord],
    cfg: TrainConfig,
    k: int = 10,
    folds: int = 10,
    seed: int = 0,
) -> tuple[float, float, list[bool]]:
    """Family recall of held-out methods on a synthetic corpus.

    Methods are dealt into ``folds`` groups after a seeded shuffle; each
    group is held out in turn, a table is trained on the remaining
    records, and every held-out method is queried with its callees.  A
    hit means the top-k defined method names include one from the same
    family.  ``folds=len(records)`` is exact leave-one-out.

    Returns ``(recall, random_baseline, hits)`` where the baseline is the
    exact hit probability of a uniformly random ranking of the same
    candidate set, averaged over queries.
    """
    family = plan.family_of()
    records = sorted(records, key=lambda r: (r.name, sorted(r.callees)))
    order = np.random.default_rng(seed).permutation(len(records))
    groups = [order[i::folds] for i in range(folds)]
    hits = [False] * len(records)
    baseline = [0.0] * len(records)
    for group in groups:
        held_ids = set(group.tolist())
        rest = [r for i, r in enumerate(records) if i not in held_ids]
        g = build_acg(rest)
        table = train(g, cfg).table
        defined = {r.name for r in rest}
        exclude = [n for n in table.names if n not in defined]
        index = Index(table)
        for i in sorted(held_ids):
            held = records[i]
            fam = family[held.name]
            same = sum(1 for n in defined if family.get(n) == fam)
            baseline[i] = random_family_hit_probability(len(defined), same, k)
            try:
                query, _ = query_embedding(table, held.callees)
            except NoKnownCalleesError:
                continue
            names = index.top_k(query, k, exclude).names
            hits[i] = any(family.get(n) == fam for n in names)
    n = len(records)
    return sum(hits) / n, sum(baseline) / n, hits
