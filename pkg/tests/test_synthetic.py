#!/usr/bin/env python3
import numpy as np
import pytest

from src.errors import ConfigError, ShapeMismatch
from src.synthetic import KINDS, generate_synthetic


@pytest.mark.parametrize("kind", KINDS)
def test_same_seed_same_values(kind):
    a = generate_synthetic(kind, (3, 6, 8), seed=11)
    b = generate_synthetic(kind, (3, 6, 8), seed=11)
    assert a.values.dtype == np.float32
    assert np.array_equal(a.values, b.values)
    assert not np.array_equal(a.values, generate_synthetic(kind, (3, 6, 8), seed=12).values)


def test_default_axis_roles():
    assert generate_synthetic("multivar", (2, 3, 4, 4)).axis_roles == ("variable", "time", "space", "space")
    assert generate_synthetic("smooth", (3, 4)).axis_roles == ("time", "space")
    assert generate_synthetic("histogram", (2, 5, 5)).axis_roles == ("space",) * 3


def test_multivar_species_are_correlated():
    ds = generate_synthetic("multivar", (4, 6, 10, 10), seed=2)
    flat = ds.values.reshape(4, -1).astype(np.float64)
    corr = np.corrcoef(flat)
    assert corr[np.triu_indices(4, 1)].min() > 0.9


def test_histogram_is_nonnegative():
    ds = generate_synthetic("histogram", (3, 12, 12), seed=4)
    assert ds.values.min() >= 0.0
    assert ds.values.max() > 0.1


def test_unknown_kind():
    with pytest.raises(ConfigError):
        generate_synthetic("turbulence", (4, 4))


def test_multivar_needs_two_axes():
    with pytest.raises(ShapeMismatch):
        generate_synthetic("multivar", (8,))
