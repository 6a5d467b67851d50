import io
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from namerec.acg import AggregatedCallGraph, UnknownNodeError
from namerec.embed import (
    EmbeddingTable,
    TrainConfig,
    TrainingDivergedError,
    _NegativeSampler,
    gradient,
    gradient_matrix,
    init_embeddings,
    load,
    loss,
    negative_update,
    read_table,
    sample_negatives,
    save,
    train,
    write_table,
)
from oracles import brute_loss, central_difference


def table_of(mapping):
    names = sorted(mapping)
    return EmbeddingTable(names, np.array([mapping[n] for n in names], dtype=float))


# -- objective ---------------------------------------------------------------


def test_hand_loss_and_gradient():
    g = AggregatedCallGraph([], [("a", "b")])
    t = table_of({"a": [0.5], "b": [1.0]})
    assert loss(t, g, 0.5) == pytest.approx(0.25, abs=1e-12)
    assert gradient(t, g, 0.5, "a")[0] == pytest.approx(-1.0, abs=1e-12)
    assert gradient(t, g, 0.5, "b")[0] == pytest.approx(0.5, abs=1e-12)


def test_loss_zero_at_fixed_point():
    # a's vector is the mean of unit vectors b and c, rescaled to unit norm
    # only if b == c; use a 2-cycle of identical unit vectors instead
    g = AggregatedCallGraph([], [("a", "b"), ("b", "a")])
    t = table_of({"a": [0.6, 0.8], "b": [0.6, 0.8]})
    assert loss(t, g, 0.3) == pytest.approx(0.0, abs=1e-15)


def test_isolated_node_costs_nothing_at_alpha_one():
    g = AggregatedCallGraph(["lonely"], [])
    t = table_of({"lonely": [3.0, -2.0]})
    assert loss(t, g, 1.0) == 0.0


def test_loss_dimension_mismatch():
    g = AggregatedCallGraph([], [("a", "b")])
    with pytest.raises(ValueError):
        loss(table_of({"a": [1.0]}), g, 0.5)


def test_gradient_unknown_name():
    g = AggregatedCallGraph([], [("a", "b")])
    t = table_of({"a": [0.5], "b": [1.0]})
    with pytest.raises(UnknownNodeError, match="unknown node"):
        gradient(t, g, 0.5, "zzz")


def test_loss_matches_brute_force(toy_graph):
    t = init_embeddings(toy_graph, 3, seed=4)
    vecs = {n: list(t[n]) for n in t.names}
    for alpha in (0.0, 0.25, 1.0):
        assert loss(t, toy_graph, alpha) == pytest.approx(brute_loss(vecs, toy_graph.edges, alpha), rel=1e-12)


def test_per_name_gradient_equals_matrix_rows(toy_graph):
    t = init_embeddings(toy_graph, 5, seed=1)
    G = gradient_matrix(t.vectors, toy_graph, 0.7)
    for i, name in enumerate(t.names):
        np.testing.assert_allclose(gradient(t, toy_graph, 0.7, name), G[i], rtol=1e-12, atol=1e-14)


def test_gradient_matches_finite_difference_with_self_loop():
    edges = [("f", "f"), ("f", "g"), ("g", "h"), ("h", "f")]
    g = AggregatedCallGraph(["x"], edges)
    t = init_embeddings(g, 3, seed=9)
    vecs = {n: list(t[n]) for n in t.names}
    for name in t.names:
        fd = central_difference(vecs, edges, 0.4, name)
        np.testing.assert_allclose(gradient(t, g, 0.4, name), fd, rtol=1e-6, atol=1e-8)


def test_norm_gradient_skipped_at_origin():
    g = AggregatedCallGraph(["z"], [])
    t = table_of({"z": [0.0, 0.0]})
    assert np.all(gradient(t, g, 0.5, "z") == 0.0)


# -- negative sampling --------------------------------------------------------


def test_negatives_complete_graph_empty():
    nodes = "abc"
    g = AggregatedCallGraph([], [(a, b) for a in nodes for b in nodes if a != b])
    assert sample_negatives(g, "a", 10, np.random.default_rng(0)) == []


def test_negatives_path():
    g = AggregatedCallGraph([], [("a", "b"), ("b", "c")])
    assert sample_negatives(g, "a", 10, np.random.default_rng(0)) == ["c"]


def test_negatives_seeded_and_eligible(toy_graph):
    a = sample_negatives(toy_graph, "saveFile", 4, np.random.default_rng(5))
    b = sample_negatives(toy_graph, "saveFile", 4, np.random.default_rng(5))
    assert a == b and len(a) == len(set(a)) == 4
    banned = {"saveFile", *toy_graph.callees("saveFile"), *toy_graph.callers("saveFile")}
    assert not banned & set(a)


def test_batch_sampler_respects_exclusions():
    rng = np.random.default_rng(0)
    nodes = [f"n{i:03d}" for i in range(300)]
    edges = {(nodes[i], nodes[j]) for i, j in rng.integers(0, 300, size=(1200, 2))}
    g = AggregatedCallGraph(nodes, edges)
    s = _NegativeSampler(g)
    batch = np.arange(300)
    out, valid = s.sample(batch, 10, np.random.default_rng(1))
    for r, m in enumerate(batch):
        picks = out[r][valid[r]].tolist()
        assert len(picks) == len(set(picks)) == min(10, int(s.eligible[m]))
        for c in picks:
            assert c != m
            assert not g.has_edge(nodes[m], nodes[c]) and not g.has_edge(nodes[c], nodes[m])


def test_batch_sampler_is_roughly_uniform():
    g = AggregatedCallGraph([f"n{i}" for i in range(40)], [("n0", "n1")])
    s = _NegativeSampler(g)
    out, valid = s.sample(np.zeros(4000, dtype=np.int64), 3, np.random.default_rng(2))
    counts = np.bincount(out[valid], minlength=40)
    assert counts[0] == counts[1] == 0
    # 12000 draws over 38 names: about 316 each
    assert counts[2:].min() > 230 and counts[2:].max() < 400


@pytest.mark.parametrize(
    "vm, vn, eta, expected",
    [
        ((1, 0), (1, 0), 1.0, (0, 0)),
        ((0, 1), (1, 0), 0.3, (0, 1)),
        ((1, 1), (0, 2), 0.5, (1, 0.5)),
        ((2, 3), (0, 0), 0.5, (2, 3)),
    ],
)
def test_negative_update_values(vm, vn, eta, expected):
    np.testing.assert_allclose(negative_update(np.array(vm, float), np.array(vn, float), eta), expected, atol=1e-15)


vec = st.lists(st.floats(-10, 10, allow_nan=False), min_size=3, max_size=3).map(np.array)


@given(vec, vec, st.floats(0, 1))
def test_negative_update_never_increases_projection(vm, vn, eta):
    if np.linalg.norm(vn) < 1e-6:
        return
    n_hat = vn / np.linalg.norm(vn)
    after = negative_update(vm, vn, eta)
    assert abs(after @ n_hat) <= abs(vm @ n_hat) + 1e-9
    # the orthogonal component is untouched
    np.testing.assert_allclose(after - (after @ n_hat) * n_hat, vm - (vm @ n_hat) * n_hat, atol=1e-9)


# -- training -------------------------------------------------------------------


def test_init_embeddings_seeded(toy_graph):
    a = init_embeddings(toy_graph, 4, seed=3)
    assert a == init_embeddings(toy_graph, 4, seed=3)
    assert a != init_embeddings(toy_graph, 4, seed=4)
    assert a.names == toy_graph.nodes
    assert np.all(np.abs(a.vectors) <= 1 / math.sqrt(4))
    assert len(init_embeddings(AggregatedCallGraph([], []), 4, 0)) == 0


def test_train_zero_loops_returns_init(toy_graph):
    cfg = TrainConfig(dim=4, loops=0, seed=2)
    assert train(toy_graph, cfg).table == init_embeddings(toy_graph, 4, 2)


def test_full_batch_step_is_gradient_descent(toy_graph):
    cfg = TrainConfig(dim=3, loops=1, batch_size=len(toy_graph), negatives=0, lr0=0.1, alpha=0.6, seed=8)
    V0 = init_embeddings(toy_graph, 3, 8).vectors
    expected = V0 - 0.1 * gradient_matrix(V0, toy_graph, 0.6)
    np.testing.assert_allclose(train(toy_graph, cfg).table.vectors, expected, rtol=1e-12, atol=1e-15)


def test_train_decreases_loss_and_is_deterministic(toy_graph):
    cfg = TrainConfig(dim=4, loops=200, seed=0)
    a = train(toy_graph, cfg)
    b = train(toy_graph, cfg)
    assert a.table == b.table and a.loss_trace == b.loss_trace
    assert a.loss_trace[-1][1] < a.loss_trace[0][1]
    assert a.loss_trace[0] == (0, loss(init_embeddings(toy_graph, 4, 0), toy_graph, cfg.alpha))
    assert a.loss_trace[-1][0] == 200


def test_train_diverges_with_named_step(toy_graph):
    cfg = TrainConfig(dim=4, loops=500, lr0=1e6, lr_decay=0.0, negatives=0, seed=0)
    with pytest.raises(TrainingDivergedError, match=r"step \d+"):
        train(toy_graph, cfg)


def test_train_empty_graph():
    with pytest.raises(ValueError):
        train(AggregatedCallGraph([], []), TrainConfig(loops=1))


@pytest.mark.parametrize(
    "kwargs",
    [dict(dim=0), dict(loops=-1), dict(batch_size=0), dict(negatives=-1), dict(alpha=1.5), dict(lr0=0), dict(lr_decay=1.0), dict(decay_per="never")],
)
def test_train_config_validation(kwargs):
    with pytest.raises(ValueError):
        TrainConfig(**kwargs)


def test_epoch_loop_unit(toy_graph):
    by_epoch = train(toy_graph, TrainConfig(dim=2, loops=3, batch_size=4, loop_unit="epoch", seed=1))
    assert by_epoch.loss_trace[-1][0] == 3 * 3  # 10 names, batches of 4


# -- persistence ------------------------------------------------------------------


def test_save_load_round_trip(tmp_path, toy_graph):
    t = train(toy_graph, TrainConfig(dim=5, loops=20, seed=1)).table
    path = tmp_path / "t.emb"
    save(t, path)
    assert load(path) == t


@settings(max_examples=50)
@given(st.lists(st.floats(allow_nan=False, allow_infinity=False, width=64), min_size=2, max_size=2), )
def test_round_trip_is_bit_exact(xs):
    t = EmbeddingTable(["a"], np.array([xs]))
    buf = io.StringIO()
    write_table(t, buf)
    assert read_table(io.StringIO(buf.getvalue())) == t


def test_empty_table_header():
    buf = io.StringIO()
    write_table(EmbeddingTable([], np.zeros((0, 7))), buf)
    assert buf.getvalue() == "0 7\n"
    assert len(read_table(io.StringIO(buf.getvalue()))) == 0


@pytest.mark.parametrize(
    "text, line",
    [
        ("2 2\na 1 2\n", "line 3"),
        ("1 2\na 1\n", "line 2"),
        ("1 2\na 1 x\n", "line 2"),
        ("x 2\n", "line 1"),
        ("2 1\nb 1\na 2\n", "line 3"),
    ],
)
def test_malformed_table_names_line(text, line):
    with pytest.raises(ValueError, match=line):
        read_table(io.StringIO(text))
