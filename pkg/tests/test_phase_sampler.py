import numpy as np
import pytest

from errors import InvalidParameterError
from phase_sampler import PhaseSampler


def test_points_are_reproducible_and_bounded():
    sampler = PhaseSampler(count=6, seed=11, amplitude=2.0)
    first, second = sampler.points(5), sampler.points(5)
    assert len(first) == 6
    for a, b in zip(first, second):
        np.testing.assert_array_equal(a.as_vector(), b.as_vector())
        assert np.all(np.abs(a.as_vector()) <= 2.0)


def test_seed_changes_points():
    a = PhaseSampler(count=1, seed=1).points(4)[0]
    b = PhaseSampler(count=1, seed=2).points(4)[0]
    assert not np.allclose(a.q, b.q)


def test_with_count_keeps_prefix():
    sampler = PhaseSampler(count=3, seed=5)
    longer = sampler.with_count(10).points(4)
    for a, b in zip(sampler.points(4), longer):
        np.testing.assert_array_equal(a.as_vector(), b.as_vector())


@pytest.mark.parametrize("kwargs", [{"count": 0}, {"count": 2.5}, {"seed": -1}, {"amplitude": 0.0}])
def test_invalid_sampler(kwargs):
    with pytest.raises(InvalidParameterError):
        PhaseSampler(**kwargs)
