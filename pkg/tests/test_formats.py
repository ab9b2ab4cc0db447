import json
import logging

import numpy as np
import pytest

from conftest import random_connected, random_digraph
from err_rewiring.formats import (
    FormatError,
    atomic_write_text,
    format_edge_list,
    load_dataset_dir,
    parse_edge_list,
    parse_masks,
    read_edit_log,
    read_features,
    save_dataset_dir,
    write_edit_log,
    write_features,
)
from err_rewiring.rewiring import Edit
from err_rewiring.synthetic import planted_partition


def test_edge_list_round_trip():
    for g in (random_connected(np.random.default_rng(0), 9, 0.3), random_digraph(np.random.default_rng(1), 7, 0.3)):
        assert parse_edge_list(format_edge_list(g)) == g


def test_header_required():
    with pytest.raises(FormatError):
        parse_edge_list("0 1\n")


def test_comments_and_blank_lines():
    g = parse_edge_list("# nodes=3 directed=0\n# a comment\n\n0 1\n2 1\n")
    assert g.edges == {(0, 1), (1, 2)}


def test_self_loops_dropped_with_log(caplog):
    with caplog.at_level(logging.WARNING):
        g = parse_edge_list("# nodes=3 directed=1\n0 0\n0 1\n2 2\n")
    assert g.edges == {(0, 1)}
    assert "dropped 2 self-loop" in caplog.text


@pytest.mark.parametrize("text", ["# nodes=2 directed=0\n0 5\n", "# nodes=2 directed=0\n0\n", "# nodes=2 directed=0\na b\n"])
def test_bad_lines(text):
    with pytest.raises(FormatError):
        parse_edge_list(text)


def test_masks():
    m = parse_masks("tv-e\nte")
    np.testing.assert_array_equal(m["train"], [1, 0, 0, 0, 1, 0])
    np.testing.assert_array_equal(m["test"], [0, 0, 0, 1, 0, 1])
    with pytest.raises(FormatError):
        parse_masks("tx")


def test_features_round_trip(tmp_path):
    x = np.random.default_rng(0).normal(size=(5, 3))
    x[0, 0] = 2.0
    write_features(tmp_path / "f.txt", x, 4)
    y, c = read_features(tmp_path / "f.txt")
    assert c == 4
    np.testing.assert_array_equal(x, y)


def test_features_shape_checked(tmp_path):
    (tmp_path / "f.txt").write_text("3 2 2\n1 2\n3 4\n")
    with pytest.raises(FormatError):
        read_features(tmp_path / "f.txt")


def test_dataset_dir_round_trip(tmp_path):
    ds = planted_partition(n=40, seed=3)
    save_dataset_dir(ds, tmp_path)
    back = load_dataset_dir(tmp_path)
    assert back.graph == ds.graph and back.n_classes == ds.n_classes
    np.testing.assert_array_equal(back.features, ds.features)
    np.testing.assert_array_equal(back.labels, ds.labels)
    for k in ("train", "val", "test"):
        np.testing.assert_array_equal(back.masks[k], ds.masks[k])


def test_edit_log_round_trip(tmp_path):
    edits = [Edit(0, "add", ((0, 3),), 3.0000000000000004, "r"), Edit(1, "skip", (), None, "s")]
    write_edit_log(edits, tmp_path / "e.json")
    assert read_edit_log(tmp_path / "e.json") == edits
    assert json.loads((tmp_path / "e.json").read_text())[0]["score"] == 3.0000000000000004


def test_atomic_write_leaves_no_temp_on_failure(tmp_path, monkeypatch):
    target = tmp_path / "out.txt"
    target.write_text("old")

    def boom(src, dst):
        raise OSError("disk full")

    monkeypatch.setattr("os.replace", boom)
    with pytest.raises(OSError):
        atomic_write_text(target, "new")
    assert target.read_text() == "old"
    assert [p.name for p in tmp_path.iterdir()] == ["out.txt"]


def test_planetoid_converter(tmp_path):
    pytest.importorskip("scipy")
    import pickle

    import scipy.sparse as sp

    # 6 nodes: 2 train (x/y), allx covers 0..3, test index 4, 5 given in shuffled order
    allx = sp.csr_matrix(np.eye(6)[:4])
    tx = sp.csr_matrix(np.eye(6)[[5, 4]])
    ally = np.eye(2)[[0, 1, 0, 1]]
    ty = np.eye(2)[[1, 0]]
    parts = {"x": allx[:2], "y": ally[:2], "allx": allx, "ally": ally, "tx": tx, "ty": ty,
             "graph": {0: [1], 1: [0, 2], 2: [3], 3: [], 4: [5, 4], 5: []}}
    for k, v in parts.items():
        with open(tmp_path / f"ind.toy.{k}", "wb") as fh:
            pickle.dump(v, fh)
    (tmp_path / "ind.toy.test.index").write_text("5\n4\n")
    from err_rewiring.formats import convert_planetoid

    ds = convert_planetoid(tmp_path, "toy")
    assert ds.graph.edges == {(0, 1), (1, 2), (2, 3), (4, 5)}
    np.testing.assert_array_equal(ds.labels, [0, 1, 0, 1, 0, 1])
    np.testing.assert_array_equal(ds.features[5], np.eye(6)[5])
    assert ds.masks["train"].sum() == 2 and ds.masks["test"][[4, 5]].all()
    np.testing.assert_array_equal(ds.masks["val"], [0, 0, 1, 1, 0, 0])
