import json

import numpy as np
import pytest

from gamgroup.data import (
    DataError,
    Dataset,
    FeatureGroup,
    load_csv,
    load_groups,
    write_csv,
)
from gamgroup.synthetic import SynthConfig, generate


class TestDataset:
    def test_defaults(self):
        ds = Dataset(("a", "b"), [[1.0, 2.0], [3.0, 4.0]], [0, 1])
        assert ds.n == 2
        np.testing.assert_array_equal(ds.weights, [1.0, 1.0])
        assert ds.subject_ids is None
        assert ds.index_of("b") == 1

    def test_immutable_arrays(self):
        ds = Dataset(("a",), [[1.0]], [1])
        with pytest.raises(ValueError):
            ds.X[0, 0] = 5.0

    @pytest.mark.parametrize(
        "kwargs, match",
        [
            (dict(feature_names=("a", "a"), X=[[1, 2]], y=[0]), "duplicate feature"),
            (dict(feature_names=("",), X=[[1]], y=[0]), "non-empty"),
            (dict(feature_names=("a",), X=np.zeros((0, 1)), y=[]), "empty"),
            (dict(feature_names=("a",), X=[[1], [2]], y=[0, 2]), "target not binary"),
            (dict(feature_names=("a",), X=[[1]], y=[0], weights=[-1.0]), "negative weight"),
            (dict(feature_names=("a",), X=[[1]], y=[0], weights=[np.inf]), "finite"),
            (dict(feature_names=("a", "b"), X=[[1]], y=[0]), "columns"),
        ],
    )
    def test_invalid(self, kwargs, match):
        with pytest.raises(DataError, match=match):
            Dataset(**kwargs)

    def test_unknown_feature(self):
        ds = Dataset(("a",), [[1.0]], [1])
        with pytest.raises(KeyError, match="'q'"):
            ds.column("q")

    def test_take_and_select(self):
        ds = Dataset(("a", "b"), [[1, 2], [3, 4], [5, 6]], [0, 1, 1], [1, 2, 3], ["s", "t", "u"])
        sub = ds.take([2, 0])
        np.testing.assert_array_equal(sub.X, [[5, 6], [1, 2]])
        np.testing.assert_array_equal(sub.weights, [3, 1])
        assert list(sub.subject_ids) == ["u", "s"]
        sel = ds.select(["b"])
        assert sel.feature_names == ("b",)
        np.testing.assert_array_equal(sel.X[:, 0], [2, 4, 6])


class TestLoadCsv:
    def test_three_rows(self, tiny_csv):
        ds = load_csv(tiny_csv, "y")
        assert ds.feature_names == ("x", "z")
        assert ds.n == 3
        np.testing.assert_array_equal(ds.y, [0, 1, 1])

    def test_blank_cell_is_missing(self, tiny_csv):
        ds = load_csv(tiny_csv, "y")
        assert np.isnan(ds.X[1, 1])
        assert not np.isnan(ds.X).any(axis=1)[[0, 2]].any()

    def test_non_numeric_cell_is_missing(self, tmp_path):
        p = tmp_path / "d.csv"
        p.write_text("x,y\n1,0\nabc,1\n")
        assert np.isnan(load_csv(p, "y").X[1, 0])

    def test_categorical_column_rejected(self, tmp_path):
        p = tmp_path / "d.csv"
        p.write_text("x,c,y\n1,red,0\n2,blue,1\n")
        with pytest.raises(DataError, match="'c'"):
            load_csv(p, "y")

    def test_target_not_binary(self, tmp_path):
        p = tmp_path / "d.csv"
        p.write_text("x,y\n1,0\n2,2\n")
        with pytest.raises(DataError, match="target not binary"):
            load_csv(p, "y")

    def test_missing_file(self, tmp_path):
        with pytest.raises(DataError, match="no such file"):
            load_csv(tmp_path / "nope.csv", "y")

    def test_missing_target_column(self, tiny_csv):
        with pytest.raises(DataError, match="'label'"):
            load_csv(tiny_csv, "label")

    def test_duplicate_column(self, tmp_path):
        p = tmp_path / "d.csv"
        p.write_text("x,x,y\n1,2,0\n")
        with pytest.raises(DataError, match="duplicate"):
            load_csv(p, "y")

    def test_weights_and_subjects(self, tmp_path):
        p = tmp_path / "d.csv"
        p.write_text("sid,x,w,y\na,1,0.5,0\nb,2,2,1\n")
        ds = load_csv(p, "y", subject_column="sid", weight_column="w")
        assert ds.feature_names == ("x",)
        np.testing.assert_array_equal(ds.weights, [0.5, 2.0])
        assert list(ds.subject_ids) == ["a", "b"]

    def test_negative_weight(self, tmp_path):
        p = tmp_path / "d.csv"
        p.write_text("x,w,y\n1,-1,0\n")
        with pytest.raises(DataError, match="negative weight"):
            load_csv(p, "y", weight_column="w")

    def test_round_trip_synthetic(self, tmp_path):
        for variant in ("additive_copy", "conflicting_correlated", "discrete_eps"):
            ds = generate(SynthConfig(variant, n=2000, seed=3, eps=0.1))
            p = tmp_path / f"{variant}.csv"
            write_csv(ds, p)
            assert load_csv(p, "y").equals(ds)

    def test_round_trip_missing(self, tmp_path):
        ds = Dataset(("a",), [[np.nan], [0.1 + 0.2]], [0, 1])
        p = tmp_path / "m.csv"
        write_csv(ds, p)
        assert load_csv(p, "y").equals(ds)


class TestGroups:
    def _write(self, tmp_path, obj_text):
        p = tmp_path / "g.json"
        p.write_text(obj_text)
        return p

    def test_overlap_allowed(self, tmp_path, tiny_csv):
        ds = load_csv(tiny_csv, "y")
        groups = load_groups(self._write(tmp_path, json.dumps({"A": ["x", "z"], "B": ["x"]})), ds)
        assert [g.name for g in groups] == ["A", "B"]
        assert groups[0].members == ("x", "z")

    def test_unknown_feature_named(self, tmp_path, tiny_csv):
        ds = load_csv(tiny_csv, "y")
        with pytest.raises(DataError, match="'q'"):
            load_groups(self._write(tmp_path, '{"A": ["q"]}'), ds)

    def test_empty_group_legal(self, tmp_path, tiny_csv):
        ds = load_csv(tiny_csv, "y")
        (g,) = load_groups(self._write(tmp_path, '{"A": []}'), ds)
        assert g.members == () and len(g) == 0

    def test_duplicate_member(self, tmp_path, tiny_csv):
        ds = load_csv(tiny_csv, "y")
        with pytest.raises(DataError, match="more than once"):
            load_groups(self._write(tmp_path, '{"A": ["x", "x"]}'), ds)

    def test_duplicate_group_name(self, tmp_path, tiny_csv):
        ds = load_csv(tiny_csv, "y")
        with pytest.raises(DataError, match="duplicate group"):
            load_groups(self._write(tmp_path, '{"A": ["x"], "A": ["z"]}'), ds)

    def test_order_independent_equality(self):
        assert FeatureGroup("g", ["x", "z"]) == FeatureGroup("g", ["z", "x"])
        assert hash(FeatureGroup("g", ["x", "z"])) == hash(FeatureGroup("g", ["z", "x"]))
        assert FeatureGroup("g", ["z", "x"]).members == ("z", "x")
