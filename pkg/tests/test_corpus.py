import io
import textwrap

import pytest
from hypothesis import given, strategies as st

from namerec.corpus import (
    MethodRecord,
    SourceUnit,
    cleanse,
    extract_corpus,
    extract_methods,
    is_serial_numbered,
    parse_package,
    read_records,
    scan_corpus,
    strip_comments_and_literals,
    write_records,
)


def methods(text, package=""):
    return {r.name: set(r.callees) for r in extract_methods(SourceUnit("X.java", package, text))}


def test_simple_method():
    assert methods("class A { void saveFile(){ open(); buf.write(x); } }") == {"saveFile": {"open", "write"}}


def test_nested_invocations():
    assert methods("class A { void f(){ g(h()); } }") == {"f": {"g", "h"}}


def test_constructor_invocation_excluded():
    assert methods("class A { Foo f(){ return new Foo(); } }") == {"f": set()}
    assert methods("class A { Object f(){ return new java.util.ArrayList<>(size()); } }") == {"f": {"size"}}


def test_top_level_method_body():
    assert methods("void f(){ g(); }") == {"f": {"g"}}


def test_keywords_are_not_calls():
    src = "class A { int f(int x){ if (x) { while (y()) { for (;;) {} } } switch (z) {} synchronized (this) { return (x); } } }"
    assert methods(src) == {"f": {"y"}}


def test_comments_and_strings_ignored():
    src = textwrap.dedent(
        '''
        class A {
            // fake(); in a comment
            /* block(); comment */
            void f() {
                String s = "g(); \\" h();";
                char c = '(';
                String t = """
                    text();
                    """;
                real();
            }
        }
        '''
    )
    assert methods(src) == {"f": {"real"}}


def test_strip_preserves_length_and_lines():
    text = 'a /* x\ny */ "s\\"t" // c\nb'
    out = strip_comments_and_literals(text)
    assert len(out) == len(text) and out.count("\n") == text.count("\n")
    assert "x" not in out and "s" not in out.replace("\n", "") and out.endswith("b")


def test_annotations_generics_throws_and_modifiers():
    src = """
    @Service
    public final class A<T extends Comparable<T>> extends B implements C {
        @Override
        public <K, V> Map<K, List<V>> group(List<T> xs) throws IOException, Boom {
            return collect(xs);
        }
        @SuppressWarnings("unchecked")
        protected static synchronized int[] arr() { return make(); }
        abstract void noBody(int x);
        native long nat();
    }
    """
    assert methods(src) == {"group": {"collect"}, "arr": {"make"}}


def test_constructor_body_not_a_method_but_nested_still_parsed():
    src = "class Store { Store(){ init(); } void save(){ write(); } }"
    assert methods(src) == {"save": {"write"}}


def test_anonymous_class_lambda_and_inner_class():
    src = """
    class A {
        void outer() {
            run(new Runnable() { public void run() { inner(); } });
            list.forEach(x -> consume(x));
            after();
        }
        static class In { int calc() { return add(1, 2); } }
        enum E { ONE { int v() { return one(); } }, TWO; int w() { return two(); } }
        record P(int x) { int sum() { return plus(x); } }
    }
    """
    got = methods(src)
    assert got["outer"] == {"run", "forEach", "consume", "after"}
    assert got["run"] == {"inner"}
    assert got["calc"] == {"add"}
    assert got["v"] == {"one"}
    assert got["w"] == {"two"}
    assert got["sum"] == {"plus"}


def test_method_references_and_super_this():
    src = "class A { void f(){ super.f(); this.g(); xs.map(Foo::bar); } }"
    assert methods(src) == {"f": {"f", "g", "map"}}


def test_interface_default_method():
    assert methods("interface I { void a(); default int b(){ return a(); } }") == {"b": {"a"}}


def test_duplicate_names_kept_as_separate_records():
    recs = extract_methods(SourceUnit("X.java", "", "class A { void f(){ g(); } void f(int x){ h(); } }"))
    assert [(r.name, set(r.callees)) for r in recs] == [("f", {"g"}), ("f", {"h"})]


def test_unbalanced_braces_keep_prefix_and_report():
    diagnostics = []
    text = "class A { void f(){ g(); } } } class B { void h(){ k(); } }"
    recs = extract_methods(SourceUnit("X.java", "", text), diagnostics)
    assert [r.name for r in recs] == ["f"]
    assert diagnostics and "X.java" in diagnostics[0]


def test_unclosed_method_dropped_with_diagnostic():
    diagnostics = []
    recs = extract_methods(SourceUnit("X.java", "", "class A { void ok(){ a(); } void f(){ g(); "), diagnostics)
    assert [r.name for r in recs] == ["ok"]
    assert diagnostics


def test_extract_is_deterministic():
    unit = SourceUnit("X.java", "", "class A { void f(){ b(); a(); c(); } }")
    assert extract_methods(unit) == extract_methods(unit)


@pytest.mark.parametrize(
    "text, package",
    [("package a;\nclass B {}", "a"), ("/* c */ package  com.x.y ;", "com.x.y"), ("class B {}", ""), ('// package fake;\nclass B {}', "")],
)
def test_parse_package(text, package):
    assert parse_package(text) == package


def test_scan_corpus(tmp_path):
    assert scan_corpus(tmp_path) == []
    (tmp_path / "b").mkdir()
    (tmp_path / "a").mkdir()
    (tmp_path / "b" / "A.java").write_text("package b;\nclass A {}")
    (tmp_path / "a" / "B.java").write_text("package a;\nclass B {}")
    (tmp_path / "a" / "notes.txt").write_text("ignored")
    (tmp_path / "a" / "Bad.java").write_bytes(b"\xff\xfe\x00bad")
    skipped = []
    units = scan_corpus(tmp_path, skipped=skipped)
    assert [u.path for u in units] == ["a/B.java", "b/A.java"]
    assert [u.package_name for u in units] == ["a", "b"]
    assert skipped == ["a/Bad.java"]


def test_scan_missing_root(tmp_path):
    with pytest.raises(FileNotFoundError):
        scan_corpus(tmp_path / "nope")


def test_extract_corpus_parallel_matches_serial():
    units = [SourceUnit(f"p{i}/X.java", "p", f"class X {{ void m{i}(){{ c{i % 3}(); }} }}") for i in range(6)]
    assert extract_corpus(units, workers=2) == extract_corpus(list(reversed(units)))


def unit(package, names):
    body = " ".join(f"void {n}(){{}}" for n in names)
    u = SourceUnit(f"{package}/{names[0]}.java", package, f"class A {{ {body} }}")
    return u, extract_methods(u)


def test_cleanse_rules():
    extracted = [
        unit("com.foo.test.util", ["parse"]),
        unit("gen", [f"get{i}" for i in range(101)]),
        unit("ok", ["parse", "get1"]),
        unit("ok2", ["get1", "get2"]),
    ]
    kept, dropped = cleanse(extracted)
    assert [u.package_name for u, _ in kept] == ["ok", "ok2"]
    assert dropped == {"test_package": 1, "serial_numbered": 1}


@pytest.mark.parametrize(
    "names, serial",
    [(["get0", "get1", "get2"], True), (["get1", "set2", "get3"], False), (["a1", "a2"], False), (["x1", "x2", "x"], False)],
)
def test_is_serial_numbered(names, serial):
    assert is_serial_numbered(names) is serial


package_names = st.sampled_from(["a", "com.test", "org.x", "tests.y", "z"])
name_lists = st.lists(st.sampled_from(["get1", "get2", "get3", "parse", "open"]), min_size=1, max_size=5)


@given(st.lists(st.tuples(package_names, name_lists), max_size=6))
def test_cleanse_is_idempotent(drawn):
    extracted = [unit(p, names) for p, names in drawn]
    once, _ = cleanse(extracted)
    twice, dropped = cleanse(once)
    assert twice == once and dropped == {"test_package": 0, "serial_numbered": 0}


def test_records_round_trip():
    recs = [MethodRecord("f", "p", "a/X.java", frozenset({"b", "a"})), MethodRecord("g", "", "Y.java", frozenset())]
    buf = io.StringIO()
    assert write_records(recs, buf) == 2
    assert '"callees": ["a", "b"]' in buf.getvalue()
    assert read_records(io.StringIO(buf.getvalue())) == recs


def test_malformed_record_line():
    with pytest.raises(ValueError, match="line 2"):
        read_records(io.StringIO('{"name": "f", "package": "", "path": "x", "callees": []}\n{oops\n'))


def test_explicit_constructor_calls_excluded():
    src = "class A { A(){ super(1); } A(int x){ this(); } void f(){ super(); this(2); g(); } }"
    assert methods(src) == {"f": {"g"}}
