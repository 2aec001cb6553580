import numpy as np
import pytest
from scipy import stats

from thermcap.stochastic import (RngStream, bridge_fill, bridge_fill_uniform, refine_bridge,
                                 sample_additive_field, sample_brownian, sample_isotropic_stable,
                                 stable_path)

N = 100_000


def cf_error(x, xi, alpha=2.0):
    d = x.shape[1]
    v = np.zeros(d)
    v[0] = xi
    emp = np.mean(np.exp(1j * x @ v))
    return abs(emp - np.exp(-abs(xi) ** alpha / 2))


def test_stream_replay_and_independence():
    a = RngStream(7, (3,)).generator().standard_normal(5)
    b = RngStream(7, (3,)).generator().standard_normal(5)
    c = RngStream(7, (4,)).generator().standard_normal(5)
    np.testing.assert_array_equal(a, b)
    assert not np.allclose(a, c)
    assert RngStream(7, (3,)).child(1).label == "3.1"


def test_stream_counter_skips_ahead():
    s = RngStream(1, (0,))
    assert not np.array_equal(s.generator().random(3), RngStream(1, (0,), counter=10).generator().random(3))


def test_brownian_cf():
    w = np.array([sample_brownian([0.5, 1.0], 1, RngStream(0, (k,))).values[-1] for k in range(N)])
    for xi in (0.5, 1.0, 2.0):
        assert cf_error(w, xi) <= 3 / np.sqrt(N)


def test_increment_variance():
    w = np.array([sample_brownian([1.0, 2.0], 1, RngStream(1, (k,))).values[:, 0] for k in range(4000)])
    inc = w[:, 1] - w[:, 0]
    assert abs(inc.var(ddof=1) - 1) <= 3 * np.sqrt(2 / 4000)


def test_brownian_replay():
    p = sample_brownian(np.linspace(0.1, 1, 50), 3, RngStream(11, (2,)))
    q = sample_brownian(np.linspace(0.1, 1, 50), 3, RngStream(11, (2,)))
    np.testing.assert_array_equal(p.values, q.values)
    assert p.at(p.times[7]) is not None
    with pytest.raises(KeyError):
        p.at(0.123456)


def test_unsorted_times_rejected():
    with pytest.raises(ValueError):
        sample_brownian([0.5, 0.2], 1, RngStream(0))
    with pytest.raises(ValueError):
        sample_brownian([0.5, 0.5], 1, RngStream(0))


def test_bridge_midpoint_law():
    rng = np.random.default_rng(12)
    s, t = 1.0, 2.0
    ws, wt = 0.3, -0.8
    mids = np.array([bridge_fill([s, t], [[ws], [wt]], [1.5], rng)[0, 0] for _ in range(10_000)])
    z = (mids - (ws + wt) / 2) / np.sqrt((t - s) / 4)
    assert stats.kstest(z, "norm").pvalue > 0.01


def test_uniform_bridge_matches_general_bridge():
    rng = np.random.default_rng(13)
    a = np.array([[0.0], [1.0]])
    b = np.array([[0.5], [0.0]])
    u = np.array([bridge_fill_uniform(a, b, [3, 1], [0.25, 0.5], rng)[:, 0] for _ in range(5000)])
    g = np.array([np.r_[bridge_fill([0, 1], [a[0], b[0]], [0.25, 0.5, 0.75], rng)[:, 0],
                        bridge_fill([0, 1], [a[1], b[1]], [0.5], rng)[:, 0]] for _ in range(5000)])
    for j in range(4):
        assert stats.ks_2samp(u[:, j], g[:, j]).pvalue > 0.01


def test_refine_idempotent_and_guards():
    p = sample_brownian(np.linspace(1, 2, 11), 2, RngStream(0, (5,)))
    same = refine_bridge(p, (1.0, 2.0), p.times[2:5], RngStream(0, (6,)))
    np.testing.assert_array_equal(same.values, p.values)
    with pytest.raises(ValueError):
        refine_bridge(p, (1.0, 1.05), [1.02], RngStream(0, (6,)))
    with pytest.raises(ValueError):
        refine_bridge(p, (1.0, 1.1), [1.5], RngStream(0, (6,)))
    q = refine_bridge(p, (1.0, 1.1), [1.05, 1.025], RngStream(0, (6,)))
    assert q.times.size == 13 and np.all(np.diff(q.times) > 0)
    for t in p.times:
        np.testing.assert_array_equal(q.at(t), p.at(t))


def test_nested_refinement_matches_single_stage():
    one, two = [], []
    for k in range(3000):
        p = sample_brownian([1.0, 2.0], 1, RngStream(1, (k,)))
        a = refine_bridge(p, (1.0, 2.0), [1.25, 1.5], RngStream(2, (k,)))
        b = refine_bridge(p, (1.0, 2.0), [1.5], RngStream(3, (k,)))
        b = refine_bridge(b, (1.0, 1.5), [1.25], RngStream(4, (k,)))
        one.append(a.at(1.25)[0] - p.at(1.0)[0])
        two.append(b.at(1.25)[0] - p.at(1.0)[0])
    assert stats.ks_2samp(one, two).pvalue > 0.01
    assert stats.kstest(np.array(one) / 0.5, "norm").pvalue > 0.01


def test_brownian_scaling():
    c = 4.0
    a = np.array([sample_brownian([c], 1, RngStream(20, (k,))).values[0, 0] for k in range(3000)]) / np.sqrt(c)
    b = np.array([sample_brownian([1.0], 1, RngStream(21, (k,))).values[0, 0] for k in range(3000)])
    assert stats.ks_2samp(a, b).pvalue > 0.01


# ------------------------------------------------------------------- stable

def test_alpha_two_is_gaussian():
    x = sample_isotropic_stable(2.0, 2, 1.0, RngStream(0, (30,)), size=N)
    for xi in (0.5, 1.0, 2.0):
        assert cf_error(x, xi, 2.0) <= 3 / np.sqrt(N)


@pytest.mark.parametrize("alpha", [0.5, 1.0, 1.5])
@pytest.mark.parametrize("d", [1, 2])
def test_stable_cf(alpha, d):
    x = sample_isotropic_stable(alpha, d, 1.0, RngStream(1, (int(alpha * 10), d)), size=N)
    for xi in (0.5, 1.0, 2.0):
        assert cf_error(x, xi, alpha) <= 3 / np.sqrt(N)


def test_stable_isotropic():
    x = sample_isotropic_stable(1.0, 2, 1.0, RngStream(2, (0,)), size=N)
    ang = np.arctan2(x[:, 1], x[:, 0])
    assert stats.kstest(ang, stats.uniform(-np.pi, 2 * np.pi).cdf).pvalue > 0.01


@pytest.mark.parametrize("alpha", [0.5, 1.0, 1.5])
def test_stable_tail_index(alpha):
    x = sample_isotropic_stable(alpha, 1, 1.0, RngStream(3, (int(alpha * 10),)), size=2_000_000)
    r = np.abs(x[:, 0])
    grid = np.geomspace(10, 100, 6)
    surv = np.array([(r > v).mean() for v in grid])
    slope = np.polyfit(np.log(grid), np.log(surv), 1)[0]
    assert slope == pytest.approx(-alpha, abs=0.1)


@pytest.mark.parametrize("alpha", [0.5, 1.5])
def test_stable_scaling(alpha):
    t = 3.0
    a = sample_isotropic_stable(alpha, 1, t, RngStream(4, (0,)), size=20_000)[:, 0] / t ** (1 / alpha)
    b = sample_isotropic_stable(alpha, 1, 1.0, RngStream(4, (1,)), size=20_000)[:, 0]
    assert stats.ks_2samp(a, b).pvalue > 0.01


def test_stable_path_increments():
    times = np.linspace(0.5, 1.5, 3)
    x = np.array([stable_path(1.0, 1, times, RngStream(5, (k,)))[:, 0] for k in range(4000)])
    inc = x[:, 2] - x[:, 1]
    ref = sample_isotropic_stable(1.0, 1, 0.5, RngStream(6, (0,)), size=4000)[:, 0]
    assert stats.ks_2samp(inc, ref).pvalue > 0.01


# ---------------------------------------------------------------- additive

def test_additive_one_axis_is_a_path():
    g = np.linspace(1, 1.5, 51)
    f = sample_additive_field(0.5, 1, 2, [g], RngStream(7, (0,)))
    np.testing.assert_array_equal(f.values(), stable_path(0.5, 2, g, RngStream(7, (0,)).child(0)))


def test_additivity_exact():
    g1, g2 = np.linspace(1, 1.5, 11), np.linspace(1, 1.5, 7)
    f = sample_additive_field(1.5, 2, 2, [g1, g2], RngStream(8, (0,)))
    v = f.values()
    assert v.shape == (11, 7, 2)
    for i, j in [(0, 0), (3, 5), (10, 6)]:
        np.testing.assert_array_equal(v[i, j], f.marginals[0][i] + f.marginals[1][j])
    assert f.image().shape == (77, 2)


def test_axis_increments_uncorrelated():
    g = np.linspace(1, 1.5, 201)
    f = sample_additive_field(1.5, 2, 1, [g, g], RngStream(9, (0,)))
    a = np.diff(f.marginals[0][:, 0])
    b = np.diff(f.marginals[1][:, 0])
    # heavy tails: compare signs, which are bounded
    n = a.size
    assert abs(np.corrcoef(np.sign(a), np.sign(b))[0, 1]) <= 3 / np.sqrt(n)


def test_field_size_guard():
    g = np.linspace(1, 1.5, 2000)
    with pytest.raises(ValueError):
        sample_additive_field(0.5, 2, 2, [g, g], RngStream(0))
    with pytest.raises(ValueError):
        sample_additive_field(0.5, 2, 2, [g], RngStream(0))
