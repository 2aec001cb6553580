"""Heat kernel, isotropic stable densities and the kernels built from them.

Stable laws are normalised by the characteristic function exp(-|xi|^alpha / 2),
so alpha = 2 is the standard Gaussian and alpha = 1 is Cauchy with scale 1/2.
"""
import csv
import warnings
from functools import lru_cache

import numpy as np
from scipy import integrate, special
from scipy.interpolate import PchipInterpolator

from .parabolic import rho


class QuadratureError(RuntimeError):
    def __init__(self, msg, residual=None):
        super().__init__(msg if residual is None else f"{msg} (residual estimate {residual:.3g})")
        self.residual = residual


def _quad(f, a, b, **kw):
    """scipy quad that raises instead of warning."""
    with warnings.catch_warnings():
        warnings.simplefilter("error", integrate.IntegrationWarning)
        try:
            val, err = integrate.quad(f, a, b, **kw)
        except integrate.IntegrationWarning as exc:
            with warnings.catch_warnings():
                warnings.simplefilter("ignore")
                val, err = integrate.quad(f, a, b, **kw)
            scale = max(abs(val), 1e-300)
            if err > 1e-6 * scale + 1e-14:
                raise QuadratureError(str(exc).split("\n")[0], err) from None
    return val, err


# ---------------------------------------------------------------- heat kernel

def heat_kernel_sq(t, r2, d):
    """p_t at a point with squared norm r2; zero for t <= 0."""
    t = np.asarray(t, dtype=float)
    r2 = np.asarray(r2, dtype=float)
    pos = t > 0
    ts = np.where(pos, t, 1.0)
    val = (2 * np.pi * ts) ** (-d / 2) * np.exp(-r2 / (2 * ts))
    out = np.where(pos, val, 0.0)
    return float(out) if out.ndim == 0 else out


def heat_kernel(t, x, d):
    """(2 pi t)^{-d/2} exp(-|x|^2 / 2t) for t > 0, else 0.

    x is a scalar (d = 1) or an array whose last axis has length d.
    """
    x = np.asarray(x, dtype=float)
    if d == 1 and (x.ndim == 0 or x.shape[-1] != 1):
        r2 = x * x
    else:
        r2 = (x * x).sum(-1)
    return heat_kernel_sq(t, r2, d)


# ------------------------------------------------------------ stable densities

def stable_density_at_zero(alpha, d):
    """g(0) = (2 pi)^{-d} |S^{d-1}| Gamma(d/alpha) 2^{d/alpha} / alpha."""
    surf = 2 * np.pi ** (d / 2) / special.gamma(d / 2)
    return float(surf * special.gamma(d / alpha) * 2 ** (d / alpha) / alpha / (2 * np.pi) ** d)


def cauchy_density(d, r, scale=0.5):
    """Closed-form isotropic Cauchy density, the alpha = 1 case."""
    r = np.asarray(r, float)
    c = special.gamma((d + 1) / 2) / np.pi ** ((d + 1) / 2)
    return c * scale / (r * r + scale * scale) ** ((d + 1) / 2)


def _oscillatory(f, w, trig="cos"):
    """int_0^inf f(s) trig(w s) ds for smooth f decaying at scale ~1.

    The first half period goes to adaptive quadrature with breakpoints at the
    decay scales; the rest to QAWF, which is unreliable when it has to cover
    the decay of f inside its first cycle (small w).
    """
    fn = np.cos if trig == "cos" else np.sin
    a = np.pi / w
    pts = [p for p in (1.0, 10.0, 100.0, 1e3) if p < a]
    v1, _ = _quad(lambda s: f(s) * fn(s * w), 0, a, limit=400, epsabs=1e-15, epsrel=1e-12,
                  points=pts or None)
    v2, _ = _quad(f, a, np.inf, weight=trig, wvar=w, limlst=200)
    return v1 + v2


def _fourier_1d(alpha, z):
    # (1/pi) int_0^inf exp(-xi^alpha/2) cos(xi z) dxi
    if z == 0:
        return stable_density_at_zero(alpha, 1)
    return _oscillatory(lambda s: np.exp(-s ** alpha / 2), z) / np.pi


def _fourier_3d(alpha, r):
    # radial inversion in R^3: (1 / 2 pi^2 r) int xi sin(xi r) exp(-xi^alpha/2)
    if r == 0:
        return stable_density_at_zero(alpha, 3)
    return _oscillatory(lambda s: s * np.exp(-s ** alpha / 2), r, "sin") / (2 * np.pi ** 2 * r)


def _hankel_2d(alpha, r, max_zeros=20000):
    # (1 / 2 pi) int xi J0(xi r) exp(-xi^alpha/2), summed between zeros of J0
    if r == 0:
        return stable_density_at_zero(alpha, 2)
    f = lambda s: special.j0(s * r) * s * np.exp(-s ** alpha / 2)
    zs = special.jn_zeros(0, 200) / r
    tot = _quad(f, 0, zs[0], limit=200)[0]
    k, lo = 0, zs[0]
    while k < max_zeros:
        if k + 1 >= len(zs):
            zs = special.jn_zeros(0, 2 * len(zs)) / r
        hi = zs[k + 1]
        p = _quad(f, lo, hi, limit=200)[0]
        tot += p
        if abs(p) < 1e-17 * max(1.0, abs(tot)) and k > 10:
            break
        lo, k = hi, k + 1
    return tot / (2 * np.pi)


@lru_cache(maxsize=32)
def _mixture_nodes(alpha, nV=200):
    # tanh-sinh nodes in the uniform angle of the positive-stable generator
    a = alpha / 2
    b = (1 - a) / a
    s = np.linspace(-3.2, 3.2, nV)
    ds = s[1] - s[0]
    V = np.pi / 2 * np.tanh(np.pi / 2 * np.sinh(s))
    dV = np.pi / 2 * (np.pi / 2 * np.cosh(s)) / np.cosh(np.pi / 2 * np.sinh(s)) ** 2 * ds
    ok = np.abs(V) < np.pi / 2
    V, dV = V[ok], dV[ok]
    with np.errstate(all="ignore"):
        lA = (np.log(np.sin(a * (V + np.pi / 2))) - np.log(np.cos(V)) / a
              + b * np.log(np.cos(V - a * (V + np.pi / 2))))
    good = np.isfinite(lA)
    lcA = np.log(subordinator_scale(alpha)) + lA[good]
    return b, lcA, dV[good]


def subordinator_scale(alpha):
    """Scale c with X = sqrt(c S0) Z, S0 having Laplace transform exp(-lambda^{alpha/2}).

    E exp(i xi.X) = E exp(-c S0 |xi|^2 / 2) = exp(-(c/2)^{alpha/2} |xi|^alpha),
    which equals exp(-|xi|^alpha / 2) for c = 2^{1 - 2/alpha}.
    """
    return 2.0 ** (1 - 2 / alpha)


def _mixture(alpha, d, r, dy=0.03):
    """Gaussian scale mixture E[(2 pi S)^{-d/2} exp(-r^2 / 2S)].

    S = c S0 with S0 = A(V) W^{-b}; the W integral runs over y = log W on a
    trapezoid grid wide enough to hold the peak at S ~ r^2.
    """
    b, lcA, dV = _mixture_nodes(alpha)
    r = np.atleast_1d(np.asarray(r, float))
    out = np.empty(r.size)
    for i, rr in enumerate(r):
        lo = min(-40.0, (np.percentile(lcA, 1) - 2 * np.log(max(rr, 1.0))) / b - 40.0)
        y = np.arange(lo, 4.0 + dy, dy)
        L = ((y - np.exp(y))[None, :] - d / 2 * (np.log(2 * np.pi) + lcA[:, None])
             + b * d * y[None, :] / 2 - rr * rr * np.exp(b * y[None, :] - lcA[:, None]) / 2)
        out[i] = (np.exp(L).sum(1) * dy * dV).sum() / np.pi
    return out


def stable_density(alpha, d, z, method="auto"):
    """Density at radius |z| of the isotropic stable law with CF exp(-|xi|^alpha/2).

    method "fourier" uses oscillatory quadrature of the inversion integral
    (cosine for d=1, Bessel J0 for d=2, sine for d=3); "mixture" integrates
    the Gaussian scale mixture over the positive (alpha/2)-stable subordinator.
    "auto" picks fourier for d=1 on 1e-4 <= |z| <= 50 and the mixture
    elsewhere; outside that window the cosine integral loses digits to
    cancellation.
    """
    if not (0 < alpha <= 2):
        raise ValueError("alpha must lie in (0, 2]")
    r = np.abs(np.asarray(z, dtype=float))
    scalar = r.ndim == 0
    r = np.atleast_1d(r)
    if method == "auto":
        if d == 1:
            out = np.empty(r.shape)
            body = (r >= 1e-4) & (r <= 50)
            out[body] = stable_density(alpha, d, r[body], "fourier")
            out[~body] = stable_density(alpha, d, r[~body], "mixture")
            return float(out[0]) if scalar else out
        method = "mixture"
    if method == "fourier":
        fn = {1: _fourier_1d, 2: _hankel_2d, 3: _fourier_3d}.get(d)
        if fn is None:
            raise ValueError("fourier route available for d in {1, 2, 3}")
        out = np.array([fn(alpha, float(v)) for v in r])
    elif method == "mixture":
        if alpha == 2:
            out = (2 * np.pi) ** (-d / 2) * np.exp(-r * r / 2)
        else:
            out = _mixture(alpha, d, r)
    else:
        raise ValueError(f"unknown method {method!r}")
    return float(out[0]) if scalar else out


class StableDensityTable:
    """Radial stable density on a log grid with monotone cubic interpolation.

    Interpolation is in (log r, log g). Below r_min the density is evaluated
    directly; above r_max the tail c r^{-d-alpha} matched at r_max is used.
    """

    def __init__(self, alpha, d, r_min=1e-6, r_max=None, n=None, values=None, radii=None):
        self.alpha = float(alpha)
        self.d = int(d)
        self.gaussian = self.alpha == 2.0
        if self.gaussian:
            # no power tail to match; evaluate the normal density directly
            radii = np.geomspace(r_min, 30.0, 2)
            values = stable_density(2.0, d, radii)
        if radii is None:
            if r_max is None:
                r_max = 1e4 if alpha < 1 else 1e3
            n = n or int(40 * np.log10(r_max / r_min)) + 1
            radii = np.geomspace(r_min, r_max, n)
            values = stable_density(alpha, d, radii)
        self.radii = np.asarray(radii, float)
        self.values = np.asarray(values, float)
        if np.any(self.values <= 0):
            raise QuadratureError("tabulated density is not positive")
        self.r_min, self.r_max = self.radii[0], self.radii[-1]
        self._interp = PchipInterpolator(np.log(self.radii), np.log(self.values))
        self.tail_const = self.values[-1] * self.r_max ** (self.d + self.alpha)
        self.at_zero = stable_density_at_zero(self.alpha, self.d)

    def __call__(self, z):
        r = np.abs(np.asarray(z, float))
        if self.gaussian:
            out = (2 * np.pi) ** (-self.d / 2) * np.exp(-r * r / 2)
            return float(out) if out.ndim == 0 else out
        out = np.empty(r.shape)
        lo = r < self.r_min
        hi = r > self.r_max
        mid = ~(lo | hi)
        out[mid] = np.exp(self._interp(np.log(r[mid])))
        out[hi] = self.tail_const * r[hi] ** (-(self.d + self.alpha))
        if np.any(lo):
            out[lo] = stable_density(self.alpha, self.d, r[lo])
        return float(out) if out.ndim == 0 else out

    def tail_slope(self, r1=5.0, r2=50.0):
        v = self(np.array([r1, r2]))
        return float(np.log(v[1] / v[0]) / np.log(r2 / r1))

    def dump(self, path):
        with open(path, "w", newline="") as fh:
            fh.write(f"# alpha={self.alpha} d={self.d} r_min={self.r_min} r_max={self.r_max}\n")
            w = csv.writer(fh)
            w.writerow(["radius", "density"])
            w.writerows(zip(self.radii.tolist(), self.values.tolist()))

    @classmethod
    def load(cls, path):
        with open(path) as fh:
            head = fh.readline().lstrip("# ").split()
            meta = dict(kv.split("=") for kv in head)
            rows = list(csv.reader(fh))[1:]
        arr = np.array(rows, float)
        return cls(float(meta["alpha"]), int(meta["d"]), radii=arr[:, 0], values=arr[:, 1])


@lru_cache(maxsize=16)
def stable_table(alpha, d):
    return StableDensityTable(alpha, d)


def stable_density_scaled(alpha, d, t_total, z, table=False):
    """g_t(z) = t^{-d/alpha} g(z t^{-1/alpha})."""
    t = np.asarray(t_total, float)
    if np.any(t <= 0):
        raise ValueError("t_total must be positive")
    g = stable_table(alpha, d) if table else (lambda r: stable_density(alpha, d, r))
    return t ** (-d / alpha) * g(np.asarray(z, float) * t ** (-1 / alpha))


# ------------------------------------------------------- resolvent integrals

def box_volume_density(s, box):
    """Density of |u| = u_1 + ... + u_N for u uniform on prod [0, b_i] (times the box volume).

    Inclusion-exclusion over the corners, an Irwin-Hall type formula.
    """
    box = np.asarray(box, float)
    N = box.size
    s = np.asarray(s, float)
    tot = np.zeros_like(s)
    for mask in range(1 << N):
        sub = [i for i in range(N) if mask >> i & 1]
        shift = box[sub].sum() if sub else 0.0
        tot += (-1) ** len(sub) * np.maximum(s - shift, 0.0) ** (N - 1) if N > 1 else \
            (-1) ** len(sub) * (s >= shift)
    return tot / special.factorial(N - 1)


def _box_kinks(box):
    box = np.asarray(box, float)
    N = box.size
    return sorted({box[[i for i in range(N) if m >> i & 1]].sum() for m in range(1, 1 << N)})


def _kappa_quad(alpha, d, r, box, g):
    # with rho = r s^{-1/alpha}:  alpha r^{alpha-d} int f((r/rho)^alpha) rho^{d-alpha} g(rho) dlog rho
    smax = float(np.sum(box))
    u_lo = np.log(r) - np.log(smax) / alpha
    u_hi = max(u_lo, 0.0) + 40.0 / alpha + 10
    pts = [np.log(r) - np.log(k) / alpha for k in _box_kinks(box) if k < smax]
    pts = sorted(p for p in pts if u_lo < p < u_hi)

    def f(u):
        p = np.exp(u)
        return box_volume_density((r / p) ** alpha, box) * p ** (d - alpha) * g(p)

    edges = [u_lo] + pts + [u_lo + 60.0 / alpha, u_hi]
    edges = sorted(set(e for e in edges if e <= u_hi))
    val = 0.0
    for a, b in zip(edges[:-1], edges[1:]):
        val += _quad(f, a, b, limit=400, epsabs=0, epsrel=1e-10)[0]
    return alpha * r ** (alpha - d) * val


class ResolventKappa:
    """kappa(z) = int over the box [0, b] of g_u(z) du, u in R^N with |u| = sum u_i.

    Below `cutoff` the power law A |z|^{-(d - alpha N)} fitted on [cutoff, 100 cutoff]
    replaces quadrature (only when d > alpha N).
    """

    def __init__(self, alpha, N, d, box=None, cutoff=1e-4):
        self.alpha, self.N, self.d = float(alpha), int(N), int(d)
        self.box = np.ones(N) if box is None else np.asarray(box, float).reshape(N)
        self.cutoff = cutoff
        self.table = stable_table(self.alpha, self.d)
        self.exponent = self.d - self.alpha * self.N
        self.A = None
        if self.exponent > 0:
            zs = np.geomspace(cutoff, 100 * cutoff, 7)
            v = np.array([self._direct(z) for z in zs])
            # exponent fixed, constant fitted in log space
            self.A = float(np.exp(np.mean(np.log(v) + self.exponent * np.log(zs))))

    def _direct(self, r):
        return _kappa_quad(self.alpha, self.d, r, self.box, self.table)

    def __call__(self, z):
        r = np.abs(np.asarray(z, float))
        scalar = r.ndim == 0
        r = np.atleast_1d(r)
        out = np.empty(r.shape)
        for i, v in np.ndenumerate(r):
            if v == 0:
                out[i] = np.inf if self.exponent > 0 else self._direct(1e-300)
            elif v < self.cutoff and self.A is not None:
                out[i] = self.A * v ** (-self.exponent)
            else:
                out[i] = self._direct(float(v))
        return float(out[0]) if scalar else out


def kappa(alpha, N, d, z, box=None):
    return _kappa_cached(float(alpha), int(N), int(d), None if box is None else tuple(np.ravel(box)))(z)


def kappa_tilde(alpha, N, d, z):
    """kappa over the half box [0, 1/2]^N."""
    return kappa(alpha, N, d, z, box=(0.5,) * N)


@lru_cache(maxsize=32)
def _kappa_cached(alpha, N, d, box):
    return ResolventKappa(alpha, N, d, box)


def kappa_fourier_1d(alpha, z, eps=0.0):
    """(phi_eps * kappa)(z) for N = 1, d = 1, box [0, 1], Gaussian mollifier of width eps.

    The transform of kappa is (1 - exp(-xi^alpha/2)) / (xi^alpha/2); eps = 0
    gives kappa itself.
    """
    def khat(s):
        q = s ** alpha / 2
        return -np.expm1(-q) / q if q > 1e-12 else 1.0 - q / 2

    z = abs(float(z))
    damp = lambda s: khat(s) * np.exp(-eps * eps * s * s / 2)
    if z == 0:
        return _quad(damp, 0, np.inf, limit=400)[0] / np.pi
    return _oscillatory(damp, z) / np.pi


# ------------------------------------------------------------ 1-potential

def potential_upsilon(alpha, x):
    """1-potential density int_0^inf g_t(x) e^{-t} dt on the line; +inf at x = 0.

    With rho = |x| t^{-1/alpha} it becomes
    alpha |x|^{alpha-1} int rho^{1-alpha} g(rho) exp(-(|x|/rho)^alpha) dlog rho.
    """
    g = stable_table(float(alpha), 1)
    xs = np.abs(np.asarray(x, float))
    out = np.empty(xs.shape)
    for i, v in np.ndenumerate(xs):
        if v == 0:
            out[i] = np.inf
            continue
        f = lambda u: np.exp((1 - alpha) * u) * g(np.exp(u)) * np.exp(-(v * np.exp(-u)) ** alpha)
        lv = np.log(v)
        edges = [lv - 8.0 / alpha, lv, lv + 10.0, lv + 10 + 60.0 / alpha]
        if lv < 0:
            edges = sorted(set(edges + [0.0]))
        val = sum(_quad(f, a, b, limit=400, epsabs=0, epsrel=1e-10)[0] for a, b in zip(edges[:-1], edges[1:]))
        out[i] = alpha * v ** (alpha - 1) * val
    return float(out) if out.ndim == 0 else out


def potential_upsilon_fourier(alpha, x):
    """Same potential from its transform 1 / (1 + |xi|^alpha / 2)."""
    x = abs(float(x))
    f = lambda s: 1.0 / (1 + s ** alpha / 2)
    return _oscillatory(f, x) / np.pi


# ------------------------------------------------------------ energy kernels

def energy_kernel_gamma(s, x, t, y, gamma, d=None):
    """exp(-|x-y|^2 / 2|t-s|) / (|t-s|^{d/2} |x-y|^gamma).

    0 when s = t and x != y, +inf at coincident points.
    """
    dx = np.atleast_1d(np.asarray(x, float) - np.asarray(y, float))
    d = dx.size if d is None else d
    r2 = float(dx @ dx)
    u = abs(float(t) - float(s))
    if u == 0:
        return np.inf if r2 == 0 else 0.0
    if r2 == 0:
        return np.inf if gamma > 0 else u ** (-d / 2)
    return float(np.exp(-r2 / (2 * u)) / (u ** (d / 2) * r2 ** (gamma / 2)))


def gamma_kernel_parts(t1, x1, t2=None, x2=None):
    """Pieces (base, log r) so that the gamma kernel is base * exp(-gamma log r).

    base = exp(-r^2/2u) u^{-d/2} with the s = t convention (0 off the diagonal,
    +inf at coincident points); log r = -inf where r = 0.
    """
    if t2 is None:
        t2, x2 = t1, x1
    t1, t2 = np.asarray(t1, float), np.asarray(t2, float)
    x1 = np.asarray(x1, float).reshape(t1.size, -1)
    x2 = np.asarray(x2, float).reshape(t2.size, -1)
    d = x1.shape[1]
    u = np.abs(t1[:, None] - t2[None, :])
    r2 = np.zeros(u.shape)
    for k in range(d):
        r2 += (x1[:, k][:, None] - x2[:, k][None, :]) ** 2
    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        base = np.where(u > 0, np.exp(-r2 / (2 * np.where(u > 0, u, 1.0))) * np.where(u > 0, u, 1.0) ** (-d / 2), 0.0)
        base = np.where((u == 0) & (r2 == 0), np.inf, base)
        lr = 0.5 * np.log(r2)
    return base, lr


def gamma_kernel_from_parts(base, lr, gamma):
    with np.errstate(over="ignore", invalid="ignore"):
        if gamma == 0:
            return base.copy()
        riesz = np.exp(-gamma * lr)
        K = base * riesz
        # 0 * inf from equal-time pairs stays 0; coincident points stay inf
        K = np.where(base == 0, 0.0, K)
    return K


def gamma_kernel_matrix(t1, x1, t2=None, x2=None, gamma=0.0):
    base, lr = gamma_kernel_parts(t1, x1, t2, x2)
    return gamma_kernel_from_parts(base, lr, gamma)


def i_beta_kernel(s, x, t, y, beta):
    """exp(-|x-y|^2 / 2|t-s|) |t-s|^{-beta/2} for s != t, else 0."""
    u = abs(float(t) - float(s))
    if u == 0:
        return 0.0
    dx = np.atleast_1d(np.asarray(x, float) - np.asarray(y, float))
    return float(np.exp(-float(dx @ dx) / (2 * u)) * u ** (-beta / 2))


def i_beta_matrix(t1, x1, beta):
    t1 = np.asarray(t1, float)
    x1 = np.asarray(x1, float).reshape(t1.size, -1)
    u = np.abs(t1[:, None] - t1[None, :])
    r2 = ((x1[:, None, :] - x1[None, :, :]) ** 2).sum(-1)
    us = np.where(u > 0, u, 1.0)
    return np.where(u > 0, np.exp(-r2 / (2 * us)) * us ** (-beta / 2), 0.0)


def i_beta_split_constant(beta):
    """sup over z > 1 of z^{2 beta} e^{-z/2}; the maximiser is z = 4 beta when that exceeds 1."""
    z = max(4 * beta, 1.0)
    return float(z ** (2 * beta) * np.exp(-z / 2))


def comparison_constant(beta):
    """c' = max(sup_{z>1} z^{2 beta} e^{-z/2}, 1)."""
    return max(i_beta_split_constant(beta), 1.0)


def bessel_riesz_kernel_rho(p, q, tau):
    """rho(p, q)^{-tau}; +inf on the diagonal."""
    r = rho(p, q)
    if r == 0:
        return np.inf if tau > 0 else 1.0
    return float(r ** (-tau))


# ------------------------------------------------------------ mollifiers

def ball_volume(d):
    return float(np.pi ** (d / 2) / special.gamma(d / 2 + 1))


def ball_indicator_density(eps, z, d=1):
    """f_eps: uniform density on the ball of radius eps."""
    r = _radius(z, d)
    out = np.where(r <= eps, 1.0 / (ball_volume(d) * eps ** d), 0.0)
    return float(out) if out.ndim == 0 else out


def _radius(z, d):
    z = np.asarray(z, float)
    if d == 1 and (z.ndim == 0 or z.shape[-1] != 1):
        return np.abs(z)
    return np.sqrt((z * z).sum(-1))


def mollifier(kind, eps, z, d=1):
    """'ball': f_eps * f_eps (two-ball overlap volume over (nu_d eps^d)^2).
    'gaussian': centred normal density with covariance eps^2 I."""
    if eps <= 0:
        raise ValueError("eps must be positive")
    r = _radius(z, d)
    if kind == "gaussian":
        out = (2 * np.pi * eps * eps) ** (-d / 2) * np.exp(-r * r / (2 * eps * eps))
    elif kind == "ball":
        x = np.clip(1 - r * r / (4 * eps * eps), 0.0, 1.0)
        # overlap of two radius-eps balls at distance r is nu_d eps^d I_x((d+1)/2, 1/2)
        out = np.where(r < 2 * eps, special.betainc((d + 1) / 2, 0.5, x), 0.0) / (ball_volume(d) * eps ** d)
    else:
        raise ValueError(f"unknown mollifier kind {kind!r}")
    return float(out) if np.ndim(out) == 0 else out


def smoothed_heat(u, r2, d, eps):
    """(phi_eps * p_u) for the Gaussian mollifier: p_{u + eps^2} for u >= 0, 0 for u < 0.

    At u = 0, p_0 is the point mass, so the smoothed kernel is phi_eps itself.
    """
    u = np.asarray(u, float)
    return np.where(u >= 0, heat_kernel_sq(np.where(u >= 0, u, 0.0) + eps * eps, r2, d), 0.0)


def riesz_kernel(z, beta, d=1):
    """|z|^{-beta}, +inf at 0; positive definite for 0 < beta < d."""
    r = _radius(z, d)
    with np.errstate(divide="ignore"):
        return np.where(r > 0, r ** (-float(beta)), np.inf)


def riesz_smoothed(z, beta, d, eps):
    """(|.|^{-beta} * phi_eps)(z) for the Gaussian mollifier, 0 < beta < d.

    E|z + eps Z|^{-beta} = eps^{-beta} 2^{-beta/2} Gamma((d-beta)/2) / Gamma(d/2)
    * 1F1(beta/2; d/2; -|z|^2 / (2 eps^2)).
    """
    if not 0 < beta < d:
        raise ValueError("need 0 < beta < d")
    r = _radius(z, d)
    c = eps ** (-beta) * 2 ** (-beta / 2) * special.gamma((d - beta) / 2) / special.gamma(d / 2)
    return c * special.hyp1f1(beta / 2, d / 2, -r * r / (2 * eps * eps))
