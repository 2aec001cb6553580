import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import integrate, special

from thermcap.kernels import (StableDensityTable, bessel_riesz_kernel_rho, box_volume_density,
                              cauchy_density, comparison_constant, energy_kernel_gamma,
                              heat_kernel, i_beta_kernel, i_beta_split_constant, kappa,
                              kappa_fourier_1d, kappa_tilde, mollifier, ball_indicator_density,
                              potential_upsilon, potential_upsilon_fourier, riesz_smoothed,
                              smoothed_heat, stable_density, stable_density_scaled,
                              subordinator_scale)


def slope(f, lo, hi, n=6):
    z = np.geomspace(lo, hi, n)
    v = np.array([f(x) for x in z])
    return np.polyfit(np.log(z), np.log(v), 1)[0]


# ---------------------------------------------------------------- heat kernel

def test_heat_examples():
    assert heat_kernel(1.0, 0.0, 1) == pytest.approx(0.3989423, abs=1e-7)
    assert heat_kernel(-1.0, 0.3, 1) == 0.0
    assert heat_kernel(0.0, 0.0, 1) == 0.0
    assert heat_kernel(0.5, np.zeros(2), 2) == pytest.approx(1 / np.pi, abs=1e-7)


@pytest.mark.parametrize("t", [0.1, 1.0, 10.0])
def test_heat_normalisation(t):
    v1 = integrate.quad(lambda x: heat_kernel(t, x, 1), -np.inf, np.inf)[0]
    v2 = integrate.quad(lambda r: 2 * np.pi * r * heat_kernel(t, np.array([r, 0.0]), 2), 0, np.inf)[0]
    assert abs(v1 - 1) < 1e-6 and abs(v2 - 1) < 1e-6


@settings(max_examples=100, deadline=None)
@given(st.floats(1e-3, 10), st.floats(-10, 10), st.integers(1, 3))
def test_heat_bounded_by_peak(t, x, d):
    assert heat_kernel(t, np.full(d, x) if d > 1 else x, d) <= (2 * np.pi * t) ** (-d / 2) * (1 + 1e-12)


def test_chapman_kolmogorov():
    s, t, x = 0.3, 0.7, 0.4
    v = integrate.quad(lambda u: heat_kernel(s, x - u, 1) * heat_kernel(t, u, 1), -np.inf, np.inf)[0]
    assert v == pytest.approx(heat_kernel(s + t, x, 1), abs=1e-5)


# ------------------------------------------------------------ stable densities

def test_stable_examples():
    assert stable_density(2, 1, 0.0) == pytest.approx(0.3989423, abs=1e-7)
    assert stable_density(1, 1, 0.0) == pytest.approx(2 / np.pi, abs=1e-7)


@pytest.mark.parametrize("d", [1, 2, 3])
def test_alpha_two_is_gaussian(d):
    z = np.linspace(0, 5, 41)
    np.testing.assert_allclose(stable_density(2, d, z), (2 * np.pi) ** (-d / 2) * np.exp(-z * z / 2), atol=1e-6)


@pytest.mark.parametrize("d", [1, 2])
def test_alpha_one_is_cauchy(d):
    z = np.array([0.0, 0.01, 0.3, 1.0, 4.0, 20.0, 80.0])
    np.testing.assert_allclose(stable_density(1, d, z), cauchy_density(d, z), atol=1e-4)


@pytest.mark.parametrize("alpha", [0.5, 1.0, 1.5])
@pytest.mark.parametrize("z", [0.05, 0.7, 3.0, 20.0])
def test_fourier_and_mixture_agree(alpha, z):
    for d in (1, 2, 3):
        a = stable_density(alpha, d, z, method="fourier")
        b = stable_density(alpha, d, z, method="mixture")
        assert a == pytest.approx(b, rel=1e-5)


@pytest.mark.parametrize("alpha", [0.5, 1.5])
def test_stable_normalises(alpha):
    g = StableDensityTable(alpha, 1)
    pts = [0, 1e-4, 1, 10, 100, 1e3, np.inf]
    v = 2 * sum(integrate.quad(g, a, b, limit=400)[0] for a, b in zip(pts, pts[1:]))
    assert v == pytest.approx(1, abs=1e-4)


def test_tail_slope_example():
    assert slope(lambda z: stable_density(0.5, 1, z), 10, 100) == pytest.approx(-1.5, abs=0.05)


def test_subordinator_scale_matches_cf():
    # X = sqrt(c S) Z with E exp(-l S) = exp(-l^{a/2}) has CF exp(-(c/2)^{a/2} |xi|^a)
    for a in (0.5, 1.0, 1.5):
        assert (subordinator_scale(a) / 2) ** (a / 2) == pytest.approx(0.5)


def test_scaled_density_examples():
    assert stable_density_scaled(2, 1, 4.0, 0.0) == pytest.approx(0.19947, abs=1e-5)
    assert stable_density_scaled(1.5, 2, 1.0, 0.8) == pytest.approx(stable_density(1.5, 2, 0.8), rel=1e-12)


@settings(max_examples=30, deadline=None)
@given(st.sampled_from([0.5, 1.0, 1.5, 2.0]), st.integers(1, 2), st.floats(0.05, 20), st.floats(0.01, 5))
def test_scaling_identity(alpha, d, t, z):
    lhs = stable_density_scaled(alpha, d, t, z) * t ** (d / alpha)
    rhs = stable_density_scaled(alpha, d, 1.0, z * t ** (-1 / alpha))
    assert lhs == pytest.approx(rhs, rel=1e-10)


def test_table_round_trip(tmp_path):
    g = StableDensityTable(1.5, 2)
    p = tmp_path / "g.csv"
    g.dump(p)
    h = StableDensityTable.load(p)
    z = np.geomspace(1e-3, 200, 17)
    np.testing.assert_allclose(h(z), g(z), rtol=1e-12)
    assert np.all(g(z) > 0)


# ----------------------------------------------------------------- resolvents

def test_box_volume_density_irwin_hall():
    # N = 2 on the unit box: density of u1 + u2 is the triangle
    s = np.array([0.25, 1.0, 1.5])
    np.testing.assert_allclose(box_volume_density(s, np.ones(2)), [0.25, 1.0, 0.5], atol=1e-12)


def test_kappa_gaussian_direct():
    z = 0.7
    direct = integrate.quad(lambda s: np.exp(-z * z / (2 * s)) / (2 * np.pi * s), 0, 1)[0]
    assert kappa(2.0, 1, 2, z) == pytest.approx(direct, rel=1e-8)
    assert kappa(2.0, 1, 2, z) == pytest.approx(special.exp1(z * z / 2) / (2 * np.pi), rel=1e-8)


def test_kappa_matches_fourier_form():
    for z in (0.05, 0.3, 2.0):
        assert kappa(0.5, 1, 1, z) == pytest.approx(kappa_fourier_1d(0.5, z), rel=1e-6)


def test_kappa_decreasing_and_positive():
    z = np.geomspace(1e-3, 10, 12)
    v = kappa(0.5, 1, 2, z)
    assert np.all(v > 0) and np.all(np.diff(v) < 0)


def test_kappa_near_zero_exponent():
    assert slope(lambda z: kappa(0.5, 1, 2, z), 1e-5, 1e-3) == pytest.approx(-1.5, abs=0.1)


@pytest.mark.xfail(strict=True, reason="pre-asymptotic: the local slope drifts to about -1.63 over [1e-3, 1e-1]")
def test_kappa_slope_upper_window():
    assert slope(lambda z: kappa(0.5, 1, 2, z), 1e-3, 1e-1) == pytest.approx(-1.5, abs=0.1)


def test_kappa_doubling():
    z = np.geomspace(1e-3, 5, 10)
    ratio = kappa(0.5, 1, 2, z, box=(2.0,)) / kappa(0.5, 1, 2, z)
    assert np.all(np.isfinite(ratio)) and ratio.max() < 10
    assert np.all(kappa_tilde(0.5, 1, 2, z) <= kappa(0.5, 1, 2, z))


# ---------------------------------------------------------------- 1-potential

def test_upsilon_slope():
    assert slope(lambda x: potential_upsilon(0.5, x), 1e-7, 1e-4) == pytest.approx(-0.5, abs=0.05)


@pytest.mark.xfail(strict=True, reason="pre-asymptotic: the constant correction pulls the slope to about -0.69 over [1e-4, 1e-1]")
def test_upsilon_slope_upper_window():
    assert slope(lambda x: potential_upsilon(0.5, x), 1e-4, 1e-1) == pytest.approx(-0.5, abs=0.05)


def test_upsilon_symmetric_and_singular():
    for x in (1e-3, 0.2, 3.0):
        assert potential_upsilon(0.5, x) == pytest.approx(potential_upsilon(0.5, -x), rel=1e-12)
    assert potential_upsilon(0.5, 0.0) == np.inf


def test_upsilon_fourier_oracle():
    for x in (0.01, 0.5, 2.0):
        assert potential_upsilon(0.5, x) == pytest.approx(potential_upsilon_fourier(0.5, x), rel=1e-6)


def test_upsilon_sandwich():
    x = np.geomspace(1e-4, 1, 20)
    ratio = potential_upsilon(0.5, x) / x ** (0.5 - 1)
    c = max(ratio.max(), 1 / ratio.min())
    assert np.isfinite(c) and np.all(ratio >= 1 / c) and np.all(ratio <= c)


# --------------------------------------------------------------- energy kernels

def test_gamma_kernel_examples():
    assert energy_kernel_gamma(1, 0, 2, 1, 0.5, 1) == pytest.approx(0.6065307, abs=1e-7)
    assert energy_kernel_gamma(1, 0, 1, 1, 0.5, 1) == 0.0
    assert energy_kernel_gamma(1, 0.3, 1, 0.3, 0.5, 1) == np.inf


def test_i_beta_examples():
    assert i_beta_kernel(1, 0, 2, 0, 1.0) == pytest.approx(1.0)
    assert i_beta_kernel(1, 0, 1, 0.4, 1.0) == 0.0


@settings(max_examples=200, deadline=None)
@given(st.floats(0.1, 2), st.floats(1e-4, 3), st.floats(1e-3, 3))
def test_i_beta_split_bound(beta, u, r):
    v = i_beta_kernel(0, 0, u, r, beta)
    c = i_beta_split_constant(beta)
    bound = min(max(c, 1.0) * r ** (-beta), u ** (-beta / 2))
    assert v <= bound * (1 + 1e-12)


def test_bessel_riesz_examples():
    p = (1.0, (0.0,))
    assert bessel_riesz_kernel_rho(p, p, 1.0) == np.inf
    assert bessel_riesz_kernel_rho(p, (2.0, (0.0,)), 1.3) == pytest.approx(1.0)
    assert comparison_constant(0.1) == 1.0


# ------------------------------------------------------------------ mollifiers

def test_gaussian_mollifier_example():
    assert mollifier("gaussian", 1.0, 0.0) == pytest.approx(0.3989423, abs=1e-7)


@pytest.mark.parametrize("kind", ["gaussian", "ball"])
def test_mollifier_normalised(kind):
    eps = 0.3
    v1 = integrate.quad(lambda z: mollifier(kind, eps, z, 1), -3, 3, points=[0])[0]
    v2 = integrate.quad(lambda r: 2 * np.pi * r * mollifier(kind, eps, np.array([r, 0.0]), 2), 0, 3)[0]
    assert v1 == pytest.approx(1, abs=1e-8) and v2 == pytest.approx(1, abs=1e-8)


def _ball_case(d, eps=0.5):
    r = np.linspace(0, 1.2, 97)
    z = np.column_stack([r] + [np.zeros_like(r)] * (d - 1)) if d > 1 else r
    return z, mollifier("ball", eps, z, d)


@pytest.mark.parametrize("d", [1, 2, 3])
def test_ball_mollifier_bounds(d):
    eps = 0.5
    z, phi = _ball_case(d, eps)
    # on |z| <= eps/2 the two eps-balls share a ball of radius eps/2
    assert np.all(phi >= 4.0 ** -d * ball_indicator_density(eps / 2, z, d) * (1 - 1e-12))
    assert np.all(phi <= 2.0 ** d * ball_indicator_density(2 * eps, z, d) * (1 + 1e-12))


@pytest.mark.xfail(strict=True, reason="the 2^-d constant fails just inside |z| = eps/2; 4^-d is the sharp overlap bound")
@pytest.mark.parametrize("d", [1, 2, 3])
def test_ball_mollifier_lower_bound_two_power(d):
    eps = 0.5
    z, phi = _ball_case(d, eps)
    assert np.all(phi >= 2.0 ** -d * ball_indicator_density(eps / 2, z, d) * (1 - 1e-12))


def test_ball_mollifier_is_self_convolution():
    eps, z = 0.4, 0.3
    f = lambda u: ball_indicator_density(eps, u) * ball_indicator_density(eps, z - u)
    v = integrate.quad(f, -eps, eps, points=[z - eps])[0]
    assert mollifier("ball", eps, z, 1) == pytest.approx(v, rel=1e-8)


def test_smoothed_heat():
    eps = 0.2
    assert smoothed_heat(0.0, 0.0, 1, eps) == pytest.approx(mollifier("gaussian", eps, 0.0))
    assert smoothed_heat(-0.5, 0.0, 1, eps) == 0.0
    u, x = 0.3, 0.5
    direct = integrate.quad(lambda v: heat_kernel(u, x - v, 1) * mollifier("gaussian", eps, v), -5, 5)[0]
    assert smoothed_heat(u, x * x, 1, eps) == pytest.approx(direct, rel=1e-8)


# the angular integral peaks sharply as s -> r; quad flags roundoff there
@pytest.mark.filterwarnings("ignore::scipy.integrate.IntegrationWarning")
@pytest.mark.parametrize("d,beta", [(1, 0.4), (2, 0.7), (2, 1.5), (3, 1.0)])
def test_riesz_smoothed_against_quadrature(d, beta):
    eps, r = 0.3, 0.45
    # E|z + eps Z|^{-beta} in polar form around z
    if d == 1:
        f = lambda u: abs(r + u) ** (-beta) * mollifier("gaussian", eps, u)
        v = integrate.quad(f, -3, 3, points=[-r], limit=200)[0]
    else:
        surf = 2 * np.pi ** (d / 2) / special.gamma(d / 2)

        def shell(s):
            # average of |z + s w|^{-beta} over the unit sphere, by the 1-D angular integral
            c = lambda th: (r * r + s * s + 2 * r * s * np.cos(th)) ** (-beta / 2) * np.sin(th) ** (d - 2)
            norm = integrate.quad(lambda th: np.sin(th) ** (d - 2), 0, np.pi)[0]
            return integrate.quad(c, 0, np.pi, limit=200)[0] / norm
        g = lambda s: surf * s ** (d - 1) * mollifier("gaussian", eps, np.r_[s, np.zeros(d - 1)], d) * shell(s)
        v = integrate.quad(g, 0, 3, points=[r], limit=200)[0]
    z = r if d == 1 else np.r_[r, np.zeros(d - 1)]
    assert riesz_smoothed(z, beta, d, eps) == pytest.approx(v, rel=1e-6)


def test_riesz_smoothed_guard():
    with pytest.raises(ValueError):
        riesz_smoothed(0.1, 1.0, 1, 0.2)
