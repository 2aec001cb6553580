"""Reproducible samplers: Brownian paths, isotropic stable vectors, additive stable fields.

Every sampler is a pure function of its parameters and an RngStream, so any
trial can be replayed bit for bit from (master seed, stream key).
"""
from dataclasses import dataclass, field

import numpy as np

from .kernels import subordinator_scale

MAX_FIELD_VERTICES = 10 ** 6


@dataclass(frozen=True)
class RngStream:
    """Counter-based stream keyed by (seed, index).

    Distinct keys give independent Philox keys through SeedSequence spawn keys;
    `counter` advances the Philox counter for skipping ahead.
    """
    seed: int
    index: tuple = (0,)
    counter: int = 0

    def __post_init__(self):
        idx = self.index if isinstance(self.index, tuple) else (int(self.index),)
        object.__setattr__(self, "index", tuple(int(i) for i in idx))

    def generator(self):
        ss = np.random.SeedSequence(int(self.seed), spawn_key=self.index)
        bg = np.random.Philox(ss)
        if self.counter:
            bg = bg.advance(self.counter)
        return np.random.Generator(bg)

    def child(self, k):
        return RngStream(self.seed, self.index + (int(k),))

    @property
    def label(self):
        return ".".join(str(i) for i in self.index)


def _rng(stream):
    if isinstance(stream, np.random.Generator):
        return stream
    return stream.generator()


@dataclass
class BrownianPath:
    times: np.ndarray
    values: np.ndarray
    d: int
    seed: int = None
    stream: str = ""

    def at(self, t):
        """Value at an existing grid time."""
        i = np.searchsorted(self.times, t)
        if i >= self.times.size or self.times[i] != t:
            raise KeyError(f"{t} is not a grid time")
        return self.values[i]

    def dump(self, path):
        cols = ",".join(["t"] + [f"x{k + 1}" for k in range(self.d)])
        np.savetxt(path, np.column_stack([self.times, self.values]), delimiter=",",
                   header=cols, comments="")


def _check_times(times):
    t = np.asarray(times, float).reshape(-1)
    if t.size == 0:
        raise ValueError("empty time grid")
    if t[0] < 0 or np.any(np.diff(t) <= 0):
        raise ValueError("times must be nonnegative, sorted and distinct")
    return t


def sample_brownian(times, d, stream, start=None):
    """W at the given times, with W(0) = 0 (or W(t0) = start when given)."""
    t = _check_times(times)
    rng = _rng(stream)
    dt = np.diff(t, prepend=0.0)
    z = rng.standard_normal((t.size, d)) * np.sqrt(dt)[:, None]
    if start is not None:
        z[0] = np.asarray(start, float)
    w = np.cumsum(z, axis=0)
    seed = getattr(stream, "seed", None)
    return BrownianPath(t, w, d, seed, getattr(stream, "label", ""))


def bridge_fill(t_known, w_known, t_new, rng):
    """Sample W at t_new given W at t_known (sorted), using the bridge law.

    Inside each gap [t_k, t_{k+1}] a free path Z is pinned by
    B(u) = W_k + Z(u) - Z(t_k) - lam (Z(t_{k+1}) - Z(t_k) - (W_{k+1} - W_k)),
    lam = (u - t_k) / (t_{k+1} - t_k). Times after the last known time get a
    free continuation.
    """
    t_known = np.asarray(t_known, float)
    w_known = np.asarray(w_known, float).reshape(t_known.size, -1)
    t_new = np.asarray(t_new, float)
    d = w_known.shape[1]
    if t_new.size == 0:
        return np.empty((0, d))
    if t_new.min() < t_known[0]:
        raise ValueError("new times before the first known time")
    allt = np.concatenate([t_known, t_new])
    order = np.argsort(allt, kind="stable")
    ts = allt[order]
    dt = np.diff(ts, prepend=ts[0])
    z = np.cumsum(rng.standard_normal((ts.size, d)) * np.sqrt(dt)[:, None], axis=0)
    zs = np.empty_like(z)
    zs[order] = z
    zk, zn = zs[:t_known.size], zs[t_known.size:]
    k = np.searchsorted(t_known, t_new, side="right") - 1
    out = np.empty((t_new.size, d))
    last = k >= t_known.size - 1
    kk = np.minimum(k, t_known.size - 2) if t_known.size > 1 else k
    if t_known.size > 1:
        inner = ~last
        a, b = kk[inner], kk[inner] + 1
        lam = ((t_new[inner] - t_known[a]) / (t_known[b] - t_known[a]))[:, None]
        out[inner] = (w_known[a] + zn[inner] - zk[a]
                      - lam * (zk[b] - zk[a] - (w_known[b] - w_known[a])))
    j = t_known.size - 1
    out[last] = w_known[j] + zn[last] - zk[j]
    return out


def bridge_fill_uniform(w_left, w_right, counts, dt, rng):
    """Bridge values on equally spaced interior points of consecutive gaps.

    Gap g runs from w_left[g] to w_right[g] with counts[g] interior points at
    spacing dt[g]. Returns the interior values of all gaps, in order.
    """
    counts = np.asarray(counts, np.int64)
    w_left = np.asarray(w_left, float)
    d = w_left.shape[1]
    tot = int(counts.sum())
    if tot == 0:
        return np.empty((0, d))
    steps = counts + 1
    sd = np.repeat(np.sqrt(np.asarray(dt, float)), steps)
    z = np.cumsum(rng.standard_normal((sd.size, d)) * sd[:, None], axis=0)
    ends = np.cumsum(steps) - 1
    base = np.concatenate([np.zeros((1, d)), z[ends[:-1]]])
    z = z - np.repeat(base, steps, axis=0)
    z_end = z[ends]
    inner = np.ones(sd.size, bool)
    inner[ends] = False
    pos = np.arange(sd.size) - np.repeat(ends - counts, steps) + 1
    lam = (pos / np.repeat(steps, steps))[inner][:, None]
    g = np.repeat(np.arange(counts.size), counts)
    jump = np.asarray(w_right, float) - w_left
    return w_left[g] + z[inner] - lam * (z_end[g] - jump[g])


def refine_bridge(path, interval, new_times, stream):
    """Insert bridge-law values at new times inside an existing grid interval.

    Times already on the grid are left untouched.
    """
    s, t = float(interval[0]), float(interval[1])
    grid = path.times
    for e in (s, t):
        i = np.searchsorted(grid, e)
        if i >= grid.size or grid[i] != e:
            raise ValueError("interval endpoints must be grid times")
    new = np.unique(np.asarray(new_times, float))
    if new.size and (new.min() < s or new.max() > t):
        raise ValueError("new times outside the interval")
    new = new[~np.isin(new, grid)]
    if new.size == 0:
        return path
    lo, hi = np.searchsorted(grid, s), np.searchsorted(grid, t)
    vals = bridge_fill(grid[lo:hi + 1], path.values[lo:hi + 1], new, _rng(stream))
    times = np.concatenate([grid, new])
    values = np.vstack([path.values, vals])
    order = np.argsort(times, kind="stable")
    return BrownianPath(times[order], values[order], path.d, path.seed, path.stream)


def positive_stable(a, size, rng):
    """Positive a-stable draws with Laplace transform exp(-lambda^a), 0 < a < 1.

    Kanter's representation of the Chambers-Mallows-Stuck generator.
    """
    v = rng.uniform(-np.pi / 2, np.pi / 2, size)
    w = rng.exponential(1.0, size)
    u = a * (v + np.pi / 2)
    return np.sin(u) / np.cos(v) ** (1 / a) * (np.cos(v - u) / w) ** ((1 - a) / a)


def sample_isotropic_stable(alpha, d, t_total, stream, size=None):
    """X with E exp(i xi.X) = exp(-t_total |xi|^alpha / 2).

    X = t^{1/alpha} sqrt(c S0) Z with S0 positive (alpha/2)-stable and Z
    standard normal; alpha = 2 is the exact Gaussian with S0 = 1.
    Returns shape (d,) when size is None, else (size, d).
    """
    if not 0 < alpha <= 2:
        raise ValueError("alpha must lie in (0, 2]")
    rng = _rng(stream)
    n = 1 if size is None else int(size)
    t = np.asarray(t_total, float)
    z = rng.standard_normal((n, d))
    if alpha == 2:
        x = z * np.sqrt(t)[..., None] if t.ndim else z * np.sqrt(t)
    else:
        s = subordinator_scale(alpha) * positive_stable(alpha / 2, n, rng)
        scale = np.power(t, 1 / alpha)
        x = z * (np.sqrt(s) * scale)[:, None]
    return x[0] if size is None else x


def stable_path(alpha, d, times, stream, start=None):
    """Stable process at sorted times; X(0) = 0 unless start is given."""
    t = _check_times(times)
    rng = _rng(stream)
    dt = np.diff(t, prepend=0.0)
    inc = np.zeros((t.size, d))
    pos = dt > 0
    inc[pos] = sample_isotropic_stable(alpha, d, dt[pos], rng, size=int(pos.sum()))
    if start is not None:
        inc[0] = np.asarray(start, float)
    return np.cumsum(inc, axis=0)


@dataclass
class AdditiveStableField:
    alpha: float
    N: int
    d: int
    grids: list
    marginals: list
    seed: int = None
    stream: str = ""
    meta: dict = field(default_factory=dict)

    @property
    def shape(self):
        return tuple(len(g) for g in self.grids)

    def values(self):
        """X(t) = sum_k X^{(k)}(t_k) on the product grid, shape grid + (d,)."""
        out = np.zeros(self.shape + (self.d,))
        for k, m in enumerate(self.marginals):
            idx = [None] * self.N + [slice(None)]
            idx[k] = slice(None)
            out = out + m[tuple(idx)]
        return out

    def image(self):
        return self.values().reshape(-1, self.d)


def sample_additive_field(alpha, N, d, grids, stream, max_vertices=MAX_FIELD_VERTICES):
    """N independent isotropic stable paths, one per axis grid, summed."""
    grids = [_check_times(g) for g in grids]
    if len(grids) != N:
        raise ValueError("need one grid per parameter axis")
    size = int(np.prod([g.size for g in grids], dtype=float))
    if size > max_vertices:
        raise ValueError(f"product grid has {size} vertices, cap is {max_vertices}")
    marg = [stable_path(alpha, d, g, stream.child(k)) for k, g in enumerate(grids)]
    return AdditiveStableField(alpha, N, d, grids, marg, getattr(stream, "seed", None),
                               getattr(stream, "label", ""))
