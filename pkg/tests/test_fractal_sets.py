import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from thermcap.fractal_sets import (FinitePointSet, LevelCapError, ProductSetSpec, SelfSimilarSpec,
                                   build_cover, distance_to_set, frostman_sum, hausdorff_dimension,
                                   interval, middle_thirds, natural_measure)

CANTOR = middle_thirds(0, 1)


def test_cover_level_one():
    np.testing.assert_allclose(build_cover(CANTOR, 1), [[0, 1 / 3], [2 / 3, 1]], atol=1e-15)


def test_cover_level_two():
    cov = build_cover(CANTOR, 2)
    assert cov.shape == (4, 2)
    np.testing.assert_allclose(cov[:, 1] - cov[:, 0], 1 / 9)
    assert np.all(np.diff(cov[:, 0]) > 0)


@pytest.mark.parametrize("level", [0, 1, 3, 6])
def test_full_interval_tiles(level):
    cov = build_cover(interval(1, 2), level)
    assert len(cov) == 2 ** level
    assert cov[0, 0] == 1 and cov[-1, 1] == 2
    np.testing.assert_allclose(cov[1:, 0], cov[:-1, 1], atol=1e-14)


def test_level_cap_refused():
    spec = SelfSimilarSpec((0, 1), 1 / 3, 2, level_cap=5)
    with pytest.raises(LevelCapError):
        build_cover(spec, 6)


@pytest.mark.parametrize("spec,dim", [
    (CANTOR, np.log(2) / np.log(3)),
    (interval(0, 1), 1.0),
    (SelfSimilarSpec((0, 1), 1 / 3, 1), 0.0),
    (FinitePointSet((0.0,)), 0.0),
])
def test_hausdorff_dimension(spec, dim):
    assert hausdorff_dimension(spec) == pytest.approx(dim, abs=1e-5)


def test_invalid_specs():
    with pytest.raises(ValueError):
        SelfSimilarSpec((0, 1), 0.6, 1)
    with pytest.raises(ValueError):
        SelfSimilarSpec((0, 1), 0.4, 3)
    with pytest.raises(ValueError):
        SelfSimilarSpec((1, 0), 0.3, 2)
    with pytest.raises(ValueError):
        ProductSetSpec(interval(0, 1), (CANTOR,))


def test_distance_examples():
    assert distance_to_set(CANTOR, 0.5, 1) == pytest.approx(1 / 6)
    assert distance_to_set(CANTOR, 0.1, 5) == 0.0
    assert distance_to_set(CANTOR, 2.0, 7) == pytest.approx(1.0)
    assert distance_to_set(FinitePointSet((0.0,)), -0.25, 0) == pytest.approx(0.25)


@settings(max_examples=200, deadline=None)
@given(st.floats(-1, 2), st.integers(1, 8))
def test_distance_matches_brute_force(p, level):
    cov = build_cover(CANTOR, level)
    brute = np.min(np.maximum(0, np.maximum(cov[:, 0] - p, p - cov[:, 1])))
    assert distance_to_set(CANTOR, p, level) == pytest.approx(brute, abs=1e-14)


@settings(max_examples=100, deadline=None)
@given(st.floats(-1, 2), st.integers(1, 7))
def test_distance_decreasing_in_level(p, level):
    # finer covers shrink, so distances can only grow
    assert distance_to_set(CANTOR, p, level + 1) >= distance_to_set(CANTOR, p, level) - 1e-15


@pytest.mark.parametrize("level", range(1, 7))
def test_cover_nesting(level):
    parent = build_cover(CANTOR, level)
    child = build_cover(CANTOR, level + 1)
    inside = (child[:, None, 0] >= parent[None, :, 0] - 1e-15) & (child[:, None, 1] <= parent[None, :, 1] + 1e-15)
    assert np.all(inside.sum(1) == 1)


def test_natural_measure_level_one():
    nm = natural_measure(CANTOR, 1)
    np.testing.assert_allclose(nm.atoms, [1 / 6, 5 / 6])
    np.testing.assert_allclose(nm.weights, [0.5, 0.5])


def test_product_natural_measure():
    mu = natural_measure(ProductSetSpec(middle_thirds(1, 2), (CANTOR,)), 1)
    assert mu.n == 4
    np.testing.assert_allclose(mu.weights, 0.25)


@pytest.mark.parametrize("level", range(1, 8))
def test_measure_consistency(level):
    fine = natural_measure(CANTOR, level + 1)
    coarse = natural_measure(CANTOR, level)
    cov = build_cover(CANTOR, level)
    cell = np.searchsorted(cov[:, 0], fine.atoms, side="right") - 1
    pushed = np.bincount(cell, weights=fine.weights, minlength=len(cov))
    np.testing.assert_allclose(pushed, coarse.weights, atol=1e-15)


def test_atom_guard():
    with pytest.raises(LevelCapError):
        natural_measure(CANTOR, 24)


def test_frostman_bounded_below_dimension():
    vals = []
    for n in range(4, 9):
        nm = natural_measure(CANTOR, n)
        vals.append(frostman_sum(nm.atoms, nm.weights, 0.5))
    assert all(b >= a - 1e-12 for a, b in zip(vals, vals[1:]))
    assert vals[-1] / vals[-2] < 1.1


@pytest.mark.parametrize("beta,grows", [(np.log(2) / np.log(3) - 0.15, False),
                                        (np.log(2) / np.log(3) + 0.15, True)])
def test_frostman_growth_ratio(beta, grows):
    vals = []
    for n in range(4, 10):
        nm = natural_measure(CANTOR, n)
        vals.append(frostman_sum(nm.atoms, nm.weights, beta))
    assert all(b >= a - 1e-12 for a, b in zip(vals, vals[1:]))
    assert (vals[-1] / vals[-2] > 1.1) == grows


def test_spec_round_trip():
    prod = ProductSetSpec(interval(1, 2), (CANTOR, FinitePointSet((0.0,))))
    assert ProductSetSpec.from_dict(prod.to_dict()) == prod
    assert prod.space_null()
    assert not ProductSetSpec(interval(1, 2), (interval(-1, 1),)).space_null()
