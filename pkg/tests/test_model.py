import json

import numpy as np
import pytest

from gamgroup.binning import BinMap
from gamgroup.model import GamModel, ModelError, PairShape, ShapeFunction

from conftest import coded_dataset, hand_model, lookup_shape


class TestPredictScore:
    def test_zero_model(self):
        m = hand_model({"a": [0.0, 0.0], "b": [0.0, 0.0, 0.0]})
        assert m.predict_score({"a": 1.0, "b": 2.0}) == 0.0
        assert m.predict_one_proba({"a": 1.0, "b": 2.0}) == 0.5

    def test_single_feature_arithmetic(self):
        m = hand_model({"a": [1.0, -1.0]}, intercept=0.3)
        assert m.predict_score({"a": 0.0}) == pytest.approx(1.3, abs=0)

    def test_missing_value_uses_missing_bin(self):
        m = GamModel(0.0, (lookup_shape("a", [1.0, -1.0], missing=0.25),))
        s = m.predict_score({"a": np.nan})
        assert s == 0.25 and np.isfinite(s)

    def test_unknown_feature(self):
        m = hand_model({"a": [1.0, -1.0]})
        with pytest.raises(KeyError, match="'q'"):
            m.predict_score({"a": 0.0, "q": 1.0})

    def test_missing_feature(self):
        m = hand_model({"a": [1.0], "b": [2.0]})
        with pytest.raises(KeyError, match="'b'"):
            m.predict_score({"a": 0.0})

    def test_batch_matches_single(self):
        m = hand_model({"a": [0.5, -0.25, 1.0], "b": [2.0, -2.0]}, intercept=-0.1)
        ds = coded_dataset({"a": [0, 1, 2, 2], "b": [1, 0, 1, 0]})
        batch = m.decision_function(ds)
        single = [m.predict_score({"a": r[0], "b": r[1]}) for r in ds.X]
        np.testing.assert_array_equal(batch, single)

    def test_pair_term(self):
        a, b = lookup_shape("a", [0.0, 0.0]), lookup_shape("b", [0.0, 0.0])
        mat = np.zeros((3, 3))
        mat[1, 0] = 4.0
        m = GamModel(0.0, (a, b), (PairShape("a", "b", a.bins, b.bins, mat),))
        assert m.predict_score({"a": 1.0, "b": 0.0}) == 4.0
        assert m.predict_score({"a": 0.0, "b": 0.0}) == 0.0


class TestValidation:
    def test_wrong_length(self):
        with pytest.raises(ModelError):
            ShapeFunction("a", BinMap((1.0,)), np.zeros(2))

    def test_non_finite(self):
        with pytest.raises(ModelError):
            ShapeFunction("a", BinMap(()), np.array([np.nan, 0.0]))

    def test_pair_order(self):
        a, b = lookup_shape("a", [0.0]), lookup_shape("b", [0.0])
        with pytest.raises(ModelError, match="order"):
            GamModel(0.0, (a, b), (PairShape("b", "a", b.bins, a.bins, np.zeros((2, 2))),))

    def test_link(self):
        with pytest.raises(ModelError):
            GamModel(0.0, (), link="identity")


class TestSerialization:
    def test_round_trip(self, tmp_path):
        a = lookup_shape("a", [0.1, -0.7, 1 / 3], missing=0.05)
        b = lookup_shape("b", [2.0, -2.0])
        mat = np.arange(12, dtype=float).reshape(4, 3) / 7
        m = GamModel(0.123, (a, b), (PairShape("a", "b", a.bins, b.bins, mat),), meta={"seed": 3})
        path = tmp_path / "m.json"
        m.save(path)
        back = GamModel.load(path)
        assert back.to_json() == m.to_json()
        np.testing.assert_array_equal(back.shapes[0].contributions, a.contributions)
        np.testing.assert_array_equal(back.pairs[0].matrix, mat)

    def test_layout(self):
        d = json.loads(hand_model({"a": [1.0, -1.0]}, 0.5).to_json())
        assert set(d) >= {"intercept", "link", "features", "pairs", "meta"}
        f = d["features"][0]
        assert f["name"] == "a" and f["cuts"] == [0.5]
        assert f["contributions"] == [1.0, -1.0] and f["missing_contribution"] == 0.0
