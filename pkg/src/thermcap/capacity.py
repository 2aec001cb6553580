"""Discrete energies, minimal energy over the simplex, and the Delta estimator.

Discrete energies drop the i = j terms. Minimal energies use a kernel matrix
whose diagonal is either zero (the plain exclusion form, which is indefinite
and degenerates to a vertex) or the self-energy of the cell each atom stands
for, which makes the quadratic form a Galerkin approximation of the energy of
cell-wise uniform measures.
"""
from dataclasses import dataclass, field, asdict

import numpy as np
from scipy import linalg

from .fractal_sets import (ProductSetSpec, diffuse_lift, lift_cell, natural_measure,
                           space_base, default_time_level)
from .kernels import (gamma_kernel_parts, gamma_kernel_from_parts, heat_kernel_sq, i_beta_matrix,
                      riesz_smoothed, smoothed_heat)
from .measure import DiscreteMeasure
from .parabolic import rho_matrix

MAX_DENSE = 10 ** 4


@dataclass
class EnergyReport:
    kind: str
    parameter: float
    value: float
    n_atoms: int
    excluded: int
    flags: list = field(default_factory=list)

    def to_dict(self):
        return asdict(self)


@dataclass
class CapacityReport:
    gamma: float
    min_energy: float
    capacity: float
    iterations: int
    gap: float
    weights: np.ndarray = None
    flags: list = field(default_factory=list)

    def to_dict(self):
        out = asdict(self)
        out.pop("weights")
        return out


@dataclass
class DeltaEstimate:
    gammas: list
    levels: list
    energies: list          # energies[i][j] = e_{levels[j]}(gammas[i])
    ratios: list            # decision statistic per gamma
    value_ratios: list      # median e_{n+1}/e_n over the top levels
    finite: list
    delta: float
    boundary: str = None
    rule: dict = field(default_factory=dict)
    flags: list = field(default_factory=list)

    def to_dict(self):
        return asdict(self)


def _pair_sum(K, w):
    """sum_{i,j} w_i w_j K_ij with +inf propagation and 0 * inf = 0."""
    pos = w > 0
    Ks = K[np.ix_(pos, pos)]
    ws = w[pos]
    if np.isinf(Ks).any():
        return np.inf
    return float(ws @ Ks @ ws)


def _blocks(n, size=2048):
    for a in range(0, n, size):
        yield a, min(n, a + size)


def _energy_sum(mu, block_kernel):
    w = mu.weights
    tot = 0.0
    for a, b in _blocks(mu.n):
        Kb = block_kernel(a, b)
        rows = np.arange(a, b)
        Kb[rows - a, rows] = 0.0
        wa = w[a:b]
        pos_r, pos_c = wa > 0, w > 0
        sub = Kb[np.ix_(pos_r, pos_c)]
        if np.isinf(sub).any():
            return np.inf
        tot += float(wa[pos_r] @ sub @ w[pos_c])
    return tot


def _report(kind, par, mu, value):
    flags = []
    if mu.n == 1:
        flags.append("degenerate: single atom")
    if not mu.diffuse_proxy:
        flags.append("not diffuse: repeated atom times")
    return EnergyReport(kind, float(par), float(value), mu.n, mu.n, flags)


def energy(mu, gamma):
    """E_gamma: off-diagonal double sum of the space-time gamma kernel."""
    if gamma < 0:
        raise ValueError("gamma must be >= 0")

    def blk(a, b):
        base, lr = gamma_kernel_parts(mu.times[a:b], mu.points[a:b], mu.times, mu.points)
        return gamma_kernel_from_parts(base, lr, gamma)
    return _report("E_gamma", gamma, mu, _energy_sum(mu, blk))


def i_beta_energy(mu, beta):
    def blk(a, b):
        t1, x1 = mu.times[a:b], mu.points[a:b]
        u = np.abs(t1[:, None] - mu.times[None, :])
        r2 = ((x1[:, None, :] - mu.points[None, :, :]) ** 2).sum(-1)
        us = np.where(u > 0, u, 1.0)
        return np.where(u > 0, np.exp(-r2 / (2 * us)) * us ** (-beta / 2), 0.0)
    return _report("I_beta", beta, mu, _energy_sum(mu, blk))


def upsilon_tau_energy(mu, tau):
    def blk(a, b):
        R = rho_matrix(mu.times[a:b], mu.points[a:b], mu.times, mu.points)
        with np.errstate(divide="ignore"):
            return np.where(R > 0, R ** (-float(tau)), np.inf if tau > 0 else 1.0)
    return _report("Upsilon_tau", tau, mu, _energy_sum(mu, blk))


def kernel_matrix(mu, gamma, diagonal=0.0):
    """Dense gamma-kernel matrix with the given diagonal."""
    if mu.n > MAX_DENSE:
        raise MemoryError(f"{mu.n} atoms exceeds the dense limit {MAX_DENSE}")
    base, lr = gamma_kernel_parts(mu.times, mu.points)
    K = gamma_kernel_from_parts(base, lr, gamma)
    K[np.diag_indices(mu.n)] = diagonal
    return K


def _independent_finite(K):
    """Greedy set of atoms with no +inf entry among them (diagonal included)."""
    n = len(K)
    bad = np.isinf(K)
    keep = ~np.diag(bad)
    deg = bad.sum(1)
    chosen = np.zeros(n, bool)
    for i in np.argsort(deg, kind="stable"):
        if keep[i] and not (bad[i] & chosen).any():
            chosen[i] = True
    return chosen


def _negative_curvature(K, w, rtol=1e-10, exact_max=200):
    """Descent direction of negative curvature on the face spanned by supp(w).

    Supports of up to `exact_max` atoms are checked exactly through the
    smallest eigenvalue of K on the zero-sum subspace; larger supports only
    along pair directions e_i - e_j. Returns None when none is found.
    """
    sup = np.flatnonzero(w > 0)
    k = sup.size
    if k < 2:
        return None
    Ks = K[np.ix_(sup, sup)]
    scale = np.abs(Ks).max()
    d = None
    if k <= exact_max:
        Z = linalg.null_space(np.ones((1, k)))
        lam, V = linalg.eigh(Z.T @ Ks @ Z)
        if lam[0] < -rtol * scale:
            d = Z @ V[:, 0]
    else:
        dg = np.diag(Ks)
        best, pair = -rtol * scale, None
        for a in range(0, k, 512):
            c = dg[a:a + 512, None] + dg[None, :] - 2 * Ks[a:a + 512]
            j = np.unravel_index(np.argmin(c), c.shape)
            if c[j] < best:
                best, pair = c[j], (a + j[0], j[1])
        if pair is not None:
            d = np.zeros(k)
            d[pair[0]], d[pair[1]] = 1.0, -1.0
    if d is None:
        return None
    full = np.zeros(len(w))
    full[sup] = d
    return -full if full @ (K @ w) > 0 else full


def frank_wolfe(K, w0=None, tol=1e-8, max_iter=100_000, max_escapes=100):
    """Minimise w'Kw over the simplex by Frank-Wolfe with away steps.

    Kw is updated in O(n) per step. Returns (value, w, iterations, gap) with
    gap = 2 (w'Kw - min_i (Kw)_i), the Frank-Wolfe duality gap. For an
    indefinite K a zero gap only certifies a stationary point, so after
    convergence the iterate is pushed along any negative-curvature direction
    of its face to the face boundary and the iteration restarts.
    """
    n = len(K)
    w = np.full(n, 1.0 / n) if w0 is None else np.array(w0, float)
    total = 0
    for _ in range(max_escapes + 1):
        f, w, it, gap = _fw_loop(K, w, tol, max_iter - total)
        total += it
        if total >= max_iter:
            break
        d = _negative_curvature(K, w)
        if d is None:
            break
        neg = d < 0
        w = np.maximum(w + np.min(w[neg] / -d[neg]) * d, 0)
        w[w < 1e-15] = 0.0
        w /= w.sum()
    return f, w, total, gap


def _fw_loop(K, w, tol, max_iter):
    n = len(K)
    Kw = K @ w
    f = float(w @ Kw)
    gap = np.inf
    it = 0
    diag = np.diag(K).copy()
    for it in range(1, max_iter + 1):
        s = int(np.argmin(Kw))
        sup = np.flatnonzero(w > 0)
        v = int(sup[np.argmax(Kw[sup])])
        gap = 2 * (f - Kw[s])
        if gap < tol * (1 + abs(f)):
            break
        if f - Kw[s] >= Kw[v] - f:
            a = Kw[s] - f
            b = diag[s] - 2 * Kw[s] + f
            e = 1.0 if b <= 0 else min(1.0, -a / b)
            w *= 1 - e
            w[s] += e
            Kw += e * (K[:, s] - Kw)
        else:
            emax = w[v] / (1 - w[v]) if w[v] < 1 else np.inf
            a = f - Kw[v]
            b = f - 2 * Kw[v] + diag[v]
            e = emax if b <= 0 else min(emax, -a / b)
            if not np.isfinite(e):
                break
            w *= 1 + e
            w[v] -= e
            if e == emax:
                w[v] = 0.0
            Kw += e * (Kw - K[:, v])
        f = f + 2 * e * a + e * e * b
        if it % 500 == 0:
            # refresh against drift of the incremental updates
            w = np.maximum(w, 0)
            w /= w.sum()
            Kw = K @ w
            f = float(w @ Kw)
    return float(f), w, it, float(max(gap, 0.0))


def min_energy(mu, gamma=0.0, diagonal=0.0, w0=None, tol=1e-8, max_iter=100_000, K=None):
    """Minimal discrete energy over weights on the atoms of `mu`.

    `diagonal` is a scalar or per-atom self-energy; pass K to reuse a matrix.
    """
    if K is None:
        K = kernel_matrix(mu, gamma, diagonal)
    n = len(K)
    if n < 1:
        raise ValueError("need at least one atom")
    flags = []
    if not np.any(K):
        w = np.full(n, 1.0 / n)
        return CapacityReport(gamma, 0.0, np.inf, 0, 0.0, w, ["degenerate kernel"])
    keep = np.ones(n, bool)
    if np.isinf(K).any():
        keep = _independent_finite(K)
        if not keep.any():
            return CapacityReport(gamma, np.inf, 0.0, 0, 0.0, np.full(n, 1.0 / n), ["infinite self-energy"])
        flags.append(f"restricted to {int(keep.sum())} of {n} atoms avoiding infinite pairs")
    Ks = K[np.ix_(keep, keep)]
    ws0 = None if w0 is None else np.asarray(w0, float)[keep]
    if ws0 is not None:
        ws0 = ws0 / ws0.sum() if ws0.sum() > 0 else None
    f, ws, it, gap = frank_wolfe(Ks, ws0, tol, max_iter)
    if it >= max_iter:
        flags.append("iteration cap reached")
    w = np.zeros(n)
    w[keep] = ws
    cap = np.inf if f == 0 else 1.0 / f
    return CapacityReport(gamma, f, cap, it, gap, w, flags)


def certificate_holds(K, w, gap, rtol=1e-12):
    Kw = K @ w
    f = w @ Kw
    return bool(Kw.min() >= f - gap - rtol * (1 + abs(f)))


# ------------------------------------------------------------ Delta estimator

def _levels_atoms(prod, level, time_level):
    if space_base(prod) == 1:
        return natural_measure(prod, (level, 0))
    return diffuse_lift(prod, level, time_level)


def _cell(prod, level, time_level, depth):
    if space_base(prod) == 1:
        return lift_cell(prod, level, depth=depth)
    return lift_cell(prod, level, time_level, depth)


def level_energies(prod, gammas, level, time_level=None, depth=2, tol=1e-8, max_iter=100_000):
    """e_level(gamma) for every gamma, reusing one distance computation."""
    mu = _levels_atoms(prod, level, time_level)
    if mu.n > MAX_DENSE:
        raise MemoryError(f"level {level} needs {mu.n} atoms (dense limit {MAX_DENSE})")
    cell = _cell(prod, level, time_level, depth)
    base, lr = gamma_kernel_parts(mu.times, mu.points)
    cb, clr = gamma_kernel_parts(cell.times, cell.points)
    out, reports = [], []
    w0 = None
    for g in gammas:
        K = gamma_kernel_from_parts(base, lr, g)
        Kc = gamma_kernel_from_parts(cb, clr, g)
        np.fill_diagonal(Kc, 0.0)
        self_e = _pair_sum(Kc, cell.weights)
        K[np.diag_indices(mu.n)] = self_e
        rep = min_energy(mu, g, K=K, w0=w0, tol=tol, max_iter=max_iter)
        out.append(rep.min_energy)
        reports.append(rep)
        if np.isfinite(rep.min_energy):
            w0 = rep.weights
    return out, reports


def growth_statistic(e, top=None):
    """Median ratio of successive increments over the top levels.

    Returns (statistic, value_ratio). A non-positive median increment means
    the energies have stopped growing and gives statistic 0.
    """
    e = np.asarray(e, float)
    if not np.all(np.isfinite(e)):
        return np.inf, np.inf
    k = len(e)
    top = top or max(2, (k - 1) // 2 + 1)
    vr = e[1:] / e[:-1]
    vstat = float(np.median(vr[-max(1, min(top, len(vr))):]))
    inc = np.diff(e)
    inc_top = inc[-min(top + 1, len(inc)):]
    if np.median(inc_top) <= 0:
        return 0.0, vstat
    r = inc_top[1:] / inc_top[:-1]
    r = np.where((inc_top[1:] > 0) & (inc_top[:-1] > 0), r, 0.0)
    return float(np.median(r)), vstat


def gamma_grid(gmin, gmax, step):
    n = int(round((gmax - gmin) / step))
    return [round(gmin + i * step, 10) for i in range(n + 1)]


def estimate_delta(prod, gammas=None, levels=None, time_level=None, depth=2, threshold=1.0,
                   tol=1e-8, max_iter=100_000):
    """Estimate sup{gamma : inf E_gamma < inf} from growth of e_n(gamma) in n.

    gamma is FINITE when the median ratio of successive increments
    (e_{n+1} - e_n) / (e_n - e_{n-1}) over the top levels is below
    `threshold`; geometric growth with factor >= 1 signals divergence.
    """
    if gammas is None:
        gammas = gamma_grid(0.02, 2.0 if prod.d > 1 else 1.0, 0.02)
    gammas = [float(g) for g in gammas]
    if any(b <= a for a, b in zip(gammas, gammas[1:])):
        raise ValueError("gamma grid must be increasing")
    if len(gammas) > 1 and max(np.diff(gammas)) > 0.05 + 1e-12:
        raise ValueError("gamma grid step must be <= 0.05")
    if levels is None:
        levels = list(range(5, 10)) if prod.d == 1 else list(range(2, 7))
    levels = list(levels)
    if len(levels) < 4:
        raise ValueError("need at least 4 levels")
    if time_level is None and space_base(prod) > 1:
        time_level = default_time_level(prod)
    table = np.empty((len(gammas), len(levels)))
    for j, lv in enumerate(levels):
        table[:, j] = level_energies(prod, gammas, lv, time_level, depth, tol, max_iter)[0]
    stats = [growth_statistic(row) for row in table]
    ratios = [s[0] for s in stats]
    finite = [r < threshold for r in ratios]
    flags = []
    first_inf = next((i for i, f in enumerate(finite) if not f), None)
    if first_inf is not None and any(finite[first_inf + 1:]):
        flags.append("non-monotone classification; transition taken at the first INFINITE gamma")
    boundary = None
    if first_inf is None:
        delta, boundary = gammas[-1], "upper"
    elif first_inf == 0:
        delta, boundary = 0.0, "lower"
    else:
        delta = 0.5 * (gammas[first_inf - 1] + gammas[first_inf])
    rule = {"statistic": "median increment ratio over top levels", "threshold": threshold,
            "time_level": time_level, "cell_depth": depth}
    return DeltaEstimate(gammas, levels, table.tolist(), ratios, [s[1] for s in stats], finite,
                         float(delta), boundary, rule, flags)


def thermal_capacity_positive(prod, levels=None, depth=2, threshold=0.9):
    """Whether e_n(0) stays bounded for the product natural measures.

    e_n(0) is the minimal heat-kernel energy on the level-n product grid.
    Bounded growth (increment ratio below `threshold`) means E_0-finite
    measures exist, i.e. positive thermal capacity.
    """
    if levels is None:
        levels = [lv for lv in range(2, 9) if _product_size(prod, lv) <= 4096]
    levels = list(levels)
    flags = []
    if not prod.space_null():
        flags.append("F has positive Lebesgue measure; criterion stated for null F")
    e = []
    for lv in levels:
        sl = lv if space_base(prod) > 1 else 0
        mu = natural_measure(prod, (lv, sl))
        if mu.n > MAX_DENSE:
            raise MemoryError(f"level {lv} needs {mu.n} atoms")
        cell = _product_cell(prod, lv, sl, depth)
        K = kernel_matrix(mu, 0.0)
        Kc = kernel_matrix(cell, 0.0)
        K[np.diag_indices(mu.n)] = _pair_sum(Kc, cell.weights)
        e.append(min_energy(mu, 0.0, K=K).min_energy)
    stat, vstat = growth_statistic(e)
    positive = bool(stat < threshold)
    return positive, {"levels": levels, "energies": e, "ratio": stat, "value_ratio": vstat,
                      "threshold": threshold, "flags": flags}


def _product_size(prod, lv):
    sl = lv if space_base(prod) > 1 else 0
    return prod.time.count(lv) * int(np.prod([s.count(sl) for s in prod.space]))


def _product_cell(prod, tl, sl, depth):
    # product grid of sub-cells inside the first (time cell x space cell)
    t = prod.time
    tsub = t.ambient[0] + (t.midpoints(depth) - t.ambient[0]) * t.ratio ** tl
    axes = []
    for s in prod.space:
        if s.is_point:
            axes.append(np.array(s.points[:1]))
        else:
            axes.append(s.ambient[0] + (s.midpoints(depth) - s.ambient[0]) * s.ratio ** sl)
    mesh = np.meshgrid(*axes, indexing="ij")
    x = np.column_stack([g.reshape(-1) for g in mesh])
    times = np.repeat(tsub, len(x))
    pts = np.tile(x, (len(tsub), 1))
    return DiscreteMeasure.uniform(times, pts)


def heat_riesz_energy(mu, beta, eps=0.0, self_pairs=True):
    """sum_ij w_i w_j p_{|t-s|}(x-y) |x-y|^{-beta}, optionally Gaussian-smoothed.

    With eps > 0 both factors are convolved with phi_eps: the heat factor
    becomes p_{|t-s|+eps^2} and the Riesz factor has a closed form. With
    eps = 0, equal-time pairs at distinct points contribute 0 and self pairs
    contribute +inf, so the unsmoothed sum is +inf whenever self pairs count.
    """
    d = mu.d
    tot = 0.0
    for a, b in _blocks(mu.n):
        u = np.abs(mu.times[a:b, None] - mu.times[None, :])
        diff = mu.points[a:b, None, :] - mu.points[None, :, :]
        r2 = (diff ** 2).sum(-1)
        if eps > 0:
            K = smoothed_heat(u, r2, d, eps) * riesz_smoothed(diff, beta, d, eps)
        else:
            us = np.where(u > 0, u, 1.0)
            with np.errstate(divide="ignore"):
                K = np.where(u > 0, heat_kernel_sq(us, r2, d) * np.where(r2 > 0, r2, 1.0) ** (-beta / 2), 0.0)
                K = np.where((u > 0) & (r2 == 0), np.inf, K)
        rows = np.arange(a, b)
        if not self_pairs:
            K[rows - a, rows] = 0.0
        elif eps == 0:
            K[rows - a, rows] = np.inf
        wa = mu.weights[a:b]
        if np.isinf(K[np.ix_(wa > 0, mu.weights > 0)]).any():
            return np.inf
        tot += float(wa @ K @ mu.weights)
    return tot
