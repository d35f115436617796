import numpy as np
import pytest

import kgalign


def test_segment_softmax_normalizes_per_segment():
    scores = np.array([[0.0], [np.log(3.0)], [5.0]])
    w = kgalign.segment_softmax(scores, [0, 0, 1], 2)
    assert w[:, 0] == pytest.approx([0.25, 0.75, 1.0])


def test_segment_softmax_rejects_bad_ids():
    with pytest.raises(kgalign.ShapeError):
        kgalign.segment_softmax(np.zeros((2, 1)), [0, 5], 2)


def test_load_kg(tmp_path):
    f = tmp_path / "rel_triples_1"
    f.write_text("a\tr\tb\nb\tr\tc\na\tr\tb\n")
    kg = kgalign.load_kg(f)
    assert kg["entities"] == ["a", "b", "c"]
    assert kg["triples"] == [(0, 0, 1), (1, 0, 2)]


def test_evaluate_identity_embeddings():
    e = np.random.default_rng(0).normal(size=(20, 4))
    r = kgalign.evaluate(e, e, [(i, i) for i in range(20)])
    assert r["hits1"] == 1.0
    assert r["mrr"] == 1.0


def test_mine_and_cli_round_trip(tmp_path):
    data = tmp_path / "data"
    kgalign.make_twin_dataset(data, entities=60, triples=200, dim=8, chains=40)
    mined = kgalign.mine_paths(data, tau_sim=0.2, tau_path=2)
    assert mined["reliable"]
    assert kgalign.mine_paths(data, tau_path=None)["reliable"] == []

    code, out, err = kgalign.main(["mine-paths", "--data", str(data), "--out", str(tmp_path / "paths")])
    assert code == 0, err
    assert (tmp_path / "paths" / "path_vocab.tsv").exists()

    code, _, err = kgalign.main(["mine-paths", "--nope"])
    assert code == 1
    assert "nope" in err


def test_missing_data_is_a_data_error(tmp_path):
    with pytest.raises(kgalign.DataError):
        kgalign.mine_paths(tmp_path)
