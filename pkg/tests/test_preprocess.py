import numpy as np
import pytest

from dynmap.datasets import ENTRANT, load_tech_firms
from dynmap.errors import ConfigError, DataError, DomainError
from dynmap.preprocess import (
    coocc_to_sim,
    edgelist_to_matrices,
    expand_matrices,
    matrices_to_edgelist,
    normalize_diss,
    sim_to_diss,
    table_to_diss,
)


def _dict_builder(rows):
    """Independent oracle: nested dicts keyed by period then pair."""
    out = {}
    for r in rows:
        out.setdefault(r["year"], {})[frozenset((r["a"], r["b"]))] = r["s"]
    return out


class TestEdgelist:
    def test_single_row(self):
        S, labels, periods = edgelist_to_matrices([{"year": 1998, "a": "A", "b": "B", "s": 0.07}],
                                                  "s", "a", "b", "year")
        assert np.array_equal(S[0], [[0, 0.07], [0.07, 0]])
        assert labels == [["A", "B"]] and periods == [1998]

    def test_disjoint_periods_match_dict_oracle(self):
        rows = [
            {"year": 1, "a": "x", "b": "y", "s": 0.3},
            {"year": 1, "a": "y", "b": "z", "s": 0.6},
            {"year": 2, "a": "p", "b": "q", "s": 0.9},
        ]
        S, labels, periods = edgelist_to_matrices(rows, "s", "a", "b", "year")
        oracle = _dict_builder(rows)
        for M, lab, period in zip(S, labels, periods):
            for i, a in enumerate(lab):
                for j, b in enumerate(lab):
                    expected = 0.0 if a == b else oracle[period].get(frozenset((a, b)), 0.0)
                    assert M[i, j] == expected
        assert labels == [["x", "y", "z"], ["p", "q"]]

    def test_labels_sorted_and_tech_firm_shape(self):
        S, labels, periods = edgelist_to_matrices(load_tech_firms(), "score", "name1", "name2", "year")
        assert len(S) == 20 and all(m.shape == (9, 9) for m in S)
        assert labels[0] == sorted(labels[0])

    def test_conflicting_duplicate_names_pair_and_period(self):
        rows = [{"t": 5, "i": "a", "j": "b", "s": 1.0}, {"t": 5, "i": "b", "j": "a", "s": 2.0}]
        with pytest.raises(DataError, match="a-b.*period 5"):
            edgelist_to_matrices(rows, "s", "i", "j", "t")

    def test_consistent_duplicate_is_fine(self):
        rows = [{"t": 5, "i": "a", "j": "b", "s": 1.0}, {"t": 5, "i": "b", "j": "a", "s": 1.0}]
        S, _, _ = edgelist_to_matrices(rows, "s", "i", "j", "t")
        assert S[0][0, 1] == 1.0

    def test_missing_column(self):
        with pytest.raises(ConfigError):
            edgelist_to_matrices([{"t": 1, "i": "a", "j": "b"}], "s", "i", "j", "t")

    def test_empty_requested_period(self):
        with pytest.raises(DataError):
            edgelist_to_matrices([{"t": 1, "i": "a", "j": "b", "s": 1}], "s", "i", "j", "t", periods=[1, 2])

    def test_round_trip(self):
        rows = [{"period": 1, "id_i": "a", "id_j": "b", "score": 0.5},
                {"period": 1, "id_i": "a", "id_j": "c", "score": 0.25}]
        S, labels, periods = edgelist_to_matrices(rows)
        assert matrices_to_edgelist(S, labels, periods) == rows


class TestSimToDiss:
    def test_mirror(self):
        D = sim_to_diss(np.array([[1.0, 0.07], [0.07, 1.0]]), "mirror")
        assert D[0, 1] == pytest.approx(0.93) and D[0, 0] == 0

    def test_mirror_identical_objects(self):
        assert sim_to_diss(np.ones((2, 2)), "mirror")[0, 1] == 0.0

    def test_mirror_out_of_range(self):
        with pytest.raises(DomainError):
            sim_to_diss(np.array([[0, 2.0], [2.0, 0]]), "mirror")

    def test_max_minus(self):
        S = np.array([[0, 5, 2], [5, 0, 1], [2, 1, 0]], dtype=float)
        assert sim_to_diss(S, "max_minus")[0, 2] == 3.0

    def test_reciprocal_requires_positive(self):
        with pytest.raises(DomainError):
            sim_to_diss(np.array([[0, 0.0], [0.0, 0]]), "reciprocal")
        assert sim_to_diss(np.array([[0, 4.0], [4.0, 0]]), "reciprocal")[0, 1] == 0.25

    def test_unknown(self):
        with pytest.raises(ConfigError):
            sim_to_diss(np.eye(2), "negate")


class TestCooccurrence:
    def test_perfect(self):
        assert coocc_to_sim(np.full((2, 2), 10.0))[0, 1] == 1.0

    def test_zero(self):
        assert coocc_to_sim(np.array([[3.0, 0], [0, 4.0]]))[0, 1] == 0.0

    def test_hand_value(self):
        assert coocc_to_sim(np.array([[25.0, 5], [5, 4.0]]))[0, 1] == pytest.approx(0.5)

    def test_zero_diagonal(self):
        with pytest.raises(DomainError):
            coocc_to_sim(np.array([[0.0, 1], [1, 4.0]]))


class TestTable:
    def test_identical_rows(self):
        assert table_to_diss(np.ones((2, 3)))[0, 1] == 0.0

    def test_one_dimensional(self):
        assert table_to_diss(np.array([[0.0], [3.0]]))[0, 1] == 3.0

    def test_unit_vectors(self):
        assert table_to_diss(np.array([[1.0, 0], [0, 1.0]]))[0, 1] == pytest.approx(np.sqrt(2), abs=1e-12)

    def test_cosine_zero_row(self):
        with pytest.raises(DomainError):
            table_to_diss(np.array([[0.0, 0], [0, 1.0]]), "cosine_distance")


class TestExpand:
    def test_entrant_mask(self):
        S, labels, periods = edgelist_to_matrices(load_tech_firms(unbalanced=True), "score", "name1", "name2",
                                                  "year")
        D, mask, roster = expand_matrices(S, labels)
        assert S[0].shape == (9, 9) and D.shape[1:] == (10, 10)
        assert list(mask[0]) == [1, 1, 1, 1, 1, 1, 1, 1, 1, 0]
        assert roster[-1] == ENTRANT[0]
        assert mask[periods.index(2002)].all()

    def test_shared_roster(self, rng):
        M = [np.array([[0, 1.0], [1.0, 0]]), np.array([[0, 2.0], [2.0, 0]])]
        D, mask, roster = expand_matrices(M, [["a", "b"], ["a", "b"]])
        assert mask.all() and np.array_equal(D, np.stack(M))

    def test_late_object_is_zero_padded(self):
        M = [np.array([[0, 1.0], [1.0, 0]]), np.array([[0, 1, 2], [1, 0, 3], [2, 3, 0.0]])]
        D, mask, roster = expand_matrices(M, [["a", "b"], ["a", "b", "c"]])
        assert roster == ["a", "b", "c"]
        assert np.array_equal(D[0, 2], [0, 0, 0]) and np.array_equal(D[0, :, 2], [0, 0, 0])
        assert list(mask[0]) == [1, 1, 0]

    def test_shape_mismatch(self):
        with pytest.raises(DataError):
            expand_matrices([np.zeros((2, 2))], [["a", "b", "c"]])


class TestNormalize:
    def test_max1(self):
        D = np.array([[[0, 4.0], [4.0, 0]], [[0, 2.0], [2.0, 0]]])
        out = normalize_diss(D, "max1")
        assert out.max() == 1.0
        assert np.array_equal(normalize_diss(out, "max1"), out)

    def test_zscore_recomputed(self, rng):
        X = rng.standard_normal((3, 5, 2))
        D = np.sqrt(np.sum((X[:, :, None] - X[:, None]) ** 2, axis=-1))
        out = normalize_diss(D, "zscore_offdiag")
        off = ~np.eye(5, dtype=bool)
        vals = D[:, off]
        z = (vals - vals.mean()) / vals.std()
        assert np.allclose(out[:, off], z - z.min(), atol=1e-14)
        assert out[:, off].min() == 0.0

    def test_masked_placeholders_ignored(self):
        D = np.array([[[0, 1.0, 9], [1.0, 0, 9], [9, 9, 0]], [[0, 2.0, 1], [2.0, 0, 1], [1, 1, 0]]])
        mask = np.array([[1, 1, 0], [1, 1, 1]])
        out = normalize_diss(D, "max1", mask)
        assert out[1, 0, 1] == 1.0 and out[0, 0, 2] == 0.0

    def test_all_zero(self):
        with pytest.raises(DomainError):
            normalize_diss(np.zeros((1, 3, 3)), "max1")
