import json

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from conftest import random_graph
from dyngraphgen.graph_store import (IngestError, IngestSpec, Standardizer, bin_timestamps, ingest_attributes,
                                     ingest_edge_list, make_graph, read_edge_events, read_graph, standardize,
                                     validate, write_graph)


def _write(path, text):
    path.write_text(text, encoding="utf-8")
    return path


def test_two_bin_example(tmp_path):
    f = _write(tmp_path / "e.txt", "0 1 0\n1 2 5\n0 2 9\n")
    g = ingest_edge_list(f, IngestSpec(num_bins=2))
    assert g.num_nodes == 3 and g.num_steps == 2
    assert {tuple(e) for e in np.argwhere(g.snapshots[0].adjacency)} == {(0, 1)}
    assert {tuple(e) for e in np.argwhere(g.snapshots[1].adjacency)} == {(1, 2), (0, 2)}


def test_repeated_events_collapse(tmp_path):
    f = _write(tmp_path / "e.txt", "0 1 0\n0 1 1\n")
    g = ingest_edge_list(f, IngestSpec(num_bins=1))
    assert g.snapshots[0].adjacency.tolist() == [[0, 1], [0, 0]]


def test_comments_commas_and_self_loops(tmp_path):
    f = _write(tmp_path / "e.txt", "# header\na,b,1\nb,b,2  # loop\n\nb c 3\n")
    g = ingest_edge_list(f, IngestSpec())
    assert list(g.node_labels) == ["a", "b", "c"]
    assert g.snapshots[0].adjacency.sum() == 2
    assert validate(g) == []


def test_parse_errors_carry_line_numbers(tmp_path):
    f = _write(tmp_path / "e.txt", "0 1 0\n0 1\n")
    with pytest.raises(IngestError, match=":2:"):
        read_edge_events(f)
    f = _write(tmp_path / "t.txt", "0 1 zz\n")
    with pytest.raises(IngestError, match=":1:"):
        read_edge_events(f)


def test_empty_file(tmp_path):
    with pytest.raises(IngestError, match="no edge events"):
        ingest_edge_list(_write(tmp_path / "e.txt", "# nothing\n"), IngestSpec())


def test_single_timestamp_needs_one_bin(tmp_path):
    f = _write(tmp_path / "e.txt", "0 1 3\n1 0 3\n")
    with pytest.raises(IngestError, match="all timestamps equal"):
        ingest_edge_list(f, IngestSpec(num_bins=2))
    assert ingest_edge_list(f, IngestSpec(num_bins=1)).num_steps == 1


def test_ingest_spec_rejects_zero_bins():
    with pytest.raises(ValueError):
        IngestSpec(num_bins=0)


def test_string_labels_roundtrip(tmp_path, rng):
    labels = [f"user-{k:03d}x" for k in rng.permutation(50)]
    rows = []
    for _ in range(1000):
        i, j = rng.choice(50, size=2, replace=False)
        rows.append(f"{labels[i]} {labels[j]} {rng.uniform(0, 100):.6f}")
    g = ingest_edge_list(_write(tmp_path / "e.txt", "\n".join(rows)), IngestSpec(num_bins=10))
    assert g.num_nodes == 50
    assert sorted(g.label_index().values()) == list(range(50))
    write_graph(g, tmp_path / "g")
    back = read_graph(tmp_path / "g")
    assert back.node_labels == g.node_labels
    assert np.array_equal(back.adjacency_stack(), g.adjacency_stack())


def test_event_edges_survive_reindexing(tmp_path, rng):
    rows = [(f"n{rng.integers(20)}", f"m{rng.integers(20)}", float(t)) for t in rng.uniform(0, 1, 300)]
    g = ingest_edge_list(_write(tmp_path / "e.txt", "\n".join(f"{a} {b} {t}" for a, b, t in rows)),
                         IngestSpec(num_bins=4))
    idx = g.label_index()
    bins = bin_timestamps(np.array([r[2] for r in rows]), 4)
    for (a, b, _), k in zip(rows, bins):
        assert g.snapshots[k].adjacency[idx[a], idx[b]] == 1


def test_carry_forward(tmp_path):
    f = _write(tmp_path / "e.txt", "0 1 0\n1 0 1\n0 1 2\n")
    g = ingest_edge_list(f, IngestSpec(num_bins=3))
    g = ingest_attributes(g, _write(tmp_path / "x.txt", "0 1 2.0\n"))
    assert [s.attributes[0, 0] for s in g.snapshots] == [2.0, 2.0, 2.0]
    assert [s.attributes[1, 0] for s in g.snapshots] == [0.0, 0.0, 0.0]


def test_no_attribute_file_means_zeros(tmp_path):
    g = ingest_edge_list(_write(tmp_path / "e.txt", "0 1 0\n"), IngestSpec(attr_dim=3))
    assert g.attr_dim == 3 and not g.snapshots[0].attributes.any()


def test_dense_attribute_file(tmp_path, rng):
    f = _write(tmp_path / "e.txt", "0 1 0\n1 2 1\n2 3 2\n")
    g = ingest_edge_list(f, IngestSpec(num_bins=3))
    x = rng.standard_normal((3, 4, 2))
    lines = [f"{i} {t + 1} {float(x[t, i, 0])!r} {float(x[t, i, 1])!r}" for t in range(3) for i in range(4)]
    g = ingest_attributes(g, _write(tmp_path / "x.txt", "\n".join(lines)))
    assert np.array_equal(g.attribute_stack(), x)


def test_attribute_errors(tmp_path):
    g = ingest_edge_list(_write(tmp_path / "e.txt", "0 1 0\n"), IngestSpec())
    with pytest.raises(KeyError):
        ingest_attributes(g, _write(tmp_path / "x.txt", "7 1 1.0\n"))
    with pytest.raises(ValueError, match="dimension"):
        ingest_attributes(g, _write(tmp_path / "y.txt", "0 1 1.0\n1 1 1.0 2.0\n"))


def test_event_count_policy(tmp_path):
    f = _write(tmp_path / "e.txt", "0 1 0\n0 2 0\n2 1 0\n")
    g = ingest_edge_list(f, IngestSpec(attribute_policy="event_counts"))
    assert g.snapshots[0].attributes.tolist() == [[0, 2], [2, 0], [1, 1]]


def test_empty_graph_written(tmp_path):
    g = make_graph(np.zeros((1, 2, 2), dtype=np.uint8))
    write_graph(g, tmp_path)
    assert (tmp_path / "edges_0001.txt").read_text() == ""
    manifest = json.loads((tmp_path / "manifest.json").read_text())
    assert manifest["N"] == 2 and manifest["F"] == 0
    assert not list(tmp_path.glob("attrs_*"))


def test_write_failure_names_path(tmp_path):
    blocker = tmp_path / "file"
    blocker.write_text("x")
    with pytest.raises(OSError, match="file"):
        write_graph(make_graph(np.zeros((1, 2, 2))), blocker / "sub")


def test_standardized_roundtrip(tmp_path, rng):
    g = standardize(random_graph(rng, n=7, steps=3, f=2))
    write_graph(g, tmp_path)
    back = read_graph(tmp_path)
    assert back.standardized
    np.testing.assert_allclose(back.attribute_stack(), g.attribute_stack(), atol=1e-9)
    np.testing.assert_allclose(back.scaler.mean, g.scaler.mean)


def test_standardizer_constant_column():
    sc = Standardizer.fit([make_graph(np.zeros((1, 3, 3)), np.ones((1, 3, 1))).snapshots[0]])
    assert sc.std[0] == 1.0


def test_validate_reports_cells():
    adj = np.zeros((2, 5, 5), dtype=np.uint8)
    adj[1, 3, 3] = 1
    x = np.zeros((2, 5, 1))
    x[0, 2, 0] = np.nan
    msgs = validate(make_graph(adj, x))
    assert "self-loop, t=2, node 3" in msgs
    assert "non-finite attribute, t=1, node 2, dim 0" in msgs
    assert validate(make_graph(np.zeros((1, 3, 3)))) == []


@given(seed=st.integers(0, 10_000), n=st.integers(1, 7), steps=st.integers(1, 4), f=st.integers(0, 3))
def test_write_read_identity(tmp_path_factory, seed, n, steps, f):
    g = random_graph(np.random.default_rng(seed), n=n, steps=steps, f=f)
    d = tmp_path_factory.mktemp("rt")
    write_graph(g, d)
    back = read_graph(d)
    assert np.array_equal(back.adjacency_stack(), g.adjacency_stack())
    np.testing.assert_allclose(back.attribute_stack(), g.attribute_stack(), rtol=0, atol=1e-9)


@given(ts=st.lists(st.floats(-1e6, 1e6, allow_nan=False), min_size=2, max_size=60), bins=st.integers(1, 12))
def test_binning_partitions_events(ts, bins):
    ts = np.asarray(ts)
    if ts.min() == ts.max() and bins > 1:
        return
    b = bin_timestamps(ts, bins)
    assert ((b >= 0) & (b < bins)).all()
    assert np.bincount(b, minlength=bins).sum() == len(ts)
    order = np.argsort(ts, kind="stable")
    assert (np.diff(b[order]) >= 0).all()  # monotone in time
