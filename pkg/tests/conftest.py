import numpy as np
import pytest

from gamgroup.binning import BinMap
from gamgroup.data import Dataset
from gamgroup.model import GamModel, ShapeFunction


def lookup_shape(name, values, missing=0.0):
    """Shape function on integer-coded inputs: value ``k`` lands in bin ``k``."""
    cuts = tuple(k + 0.5 for k in range(len(values) - 1))
    return ShapeFunction(name, BinMap(cuts), np.array(list(values) + [missing], dtype=float))


def hand_model(tables, intercept=0.0):
    """Model from ``{name: per-bin contributions}`` over integer codes."""
    return GamModel(intercept, tuple(lookup_shape(n, v) for n, v in tables.items()))


def coded_dataset(codes, y=None, weights=None):
    """Dataset of integer bin codes ``{name: [code per sample]}``."""
    names = list(codes)
    n = len(codes[names[0]])
    if y is None:
        y = np.arange(n) % 2
    return Dataset.from_columns({k: np.asarray(v, float) for k, v in codes.items()}, y, weights)


@pytest.fixture
def tiny_csv(tmp_path):
    p = tmp_path / "tiny.csv"
    p.write_text("x,z,y\n1.0,2.0,0\n2.5,,1\n3.0,4.0,1\n")
    return p
