"""Monte Carlo experiments on Brownian images of product sets, and report I/O.

Each run_* function takes an ExperimentConfig and returns an ExperimentReport.
Trials are pure functions of (config, trial index): trial k draws from
RngStream(seed, (k,)) and its children, so trials can run in any order or in
parallel and the fold over trial index is deterministic.
"""
import csv
import hashlib
import json
import math
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, asdict

import numpy as np
from scipy import stats
from scipy.spatial import cKDTree

from . import __version__
from .capacity import estimate_delta, level_energies, growth_statistic, thermal_capacity_positive
from .fractal_sets import (ProductSetSpec, SelfSimilarSpec, FinitePointSet, _merged_cover,
                           cover_level_for, distance_to_product, natural_measure)
from .parabolic import estimate_dim_rho, euclid_box_count_dim
from .stochastic import RngStream, sample_additive_field, sample_brownian, bridge_fill_uniform

KINDS = ("intersection_dim", "hitting_probability", "rectangle_hitting", "kaufman_check",
         "additive_hitting", "random_measure")
DISCRETIZATION_FLAG = ("grid sampler: jumps and excursions between grid times are not "
                       "represented; membership is tested on a delta-thickened grid image")
SUP_PROXY_LABEL = "max over trials (lower-bound proxy for the essential supremum)"


class ConfigError(ValueError):
    pass


class NumericalError(RuntimeError):
    pass


@dataclass
class ExperimentConfig:
    kind: str
    set: ProductSetSpec
    d: int
    trials: int = 200
    seed: int = 0
    h: float = 1e-5
    delta: float = 1e-2
    scales: list = None
    gamma_grid: dict = None
    levels: dict = None
    out_dir: str = None
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ConfigError(f"unknown experiment kind {self.kind!r}")
        if int(self.trials) < 1:
            raise ConfigError("trials must be >= 1")
        if not self.h > 0 or not self.delta > 0:
            raise ConfigError("h and delta must be positive")
        if self.set.d != self.d:
            raise ConfigError(f"set has {self.set.d} space factors but d = {self.d}")
        if self.scales is not None:
            s = sorted(float(v) for v in self.scales)
            if len(s) < 2 or s[0] <= 0:
                raise ConfigError("scales must hold at least two positive values")

    @property
    def delta_eff(self):
        """Membership thickness coupled to the step: max(delta, 3 sqrt(h))."""
        return max(float(self.delta), 3 * math.sqrt(self.h))

    @property
    def advisories(self):
        out = []
        if self.delta < math.sqrt(self.h):
            out.append(f"delta {self.delta} below sqrt(h); raised to {self.delta_eff:.4g}")
        return out

    def to_dict(self):
        return {"kind": self.kind, "set": self.set.to_dict(), "d": self.d, "trials": self.trials,
                "seed": self.seed, "h": self.h, "delta": self.delta, "scales": self.scales,
                "gamma_grid": self.gamma_grid, "levels": self.levels, "out_dir": self.out_dir,
                "params": self.params}

    @classmethod
    def from_dict(cls, obj):
        try:
            prod = ProductSetSpec.from_dict(obj["set"])
            return cls(kind=obj["kind"], set=prod, d=int(obj.get("d", prod.d)),
                       trials=int(obj.get("trials", 200)), seed=int(obj.get("seed", 0)),
                       h=float(obj.get("h", 1e-5)), delta=float(obj.get("delta", 1e-2)),
                       scales=obj.get("scales"), gamma_grid=obj.get("gamma_grid"),
                       levels=obj.get("levels"), out_dir=obj.get("out_dir"),
                       params=dict(obj.get("params", {})))
        except ConfigError:
            raise
        except (KeyError, TypeError, ValueError) as e:
            raise ConfigError(f"invalid config: {e}") from e

    def hash(self):
        blob = json.dumps(self.to_dict(), sort_keys=True).encode()
        return hashlib.sha256(blob).hexdigest()


def load_config(path):
    try:
        with open(path) as fh:
            obj = json.load(fh)
    except FileNotFoundError as e:
        raise ConfigError(f"config file not found: {path}") from e
    except json.JSONDecodeError as e:
        raise ConfigError(f"config is not valid JSON: {e}") from e
    if "kind" not in obj:
        obj["kind"] = "intersection_dim"
    return ExperimentConfig.from_dict(obj)


@dataclass
class TrialRecord:
    trial: int
    stream: str
    hits: int
    dim_estimate: float = None
    runtime_ms: float = 0.0
    summary: dict = field(default_factory=dict)


@dataclass
class ExperimentReport:
    config: dict
    trials: list
    aggregate: dict
    capacity_side: dict
    verdicts: dict
    flags: list = field(default_factory=list)

    def to_dict(self, timings=False):
        trials = []
        for r in self.trials:
            row = asdict(r)
            if not timings:
                row.pop("runtime_ms")
            trials.append(row)
        return {"config": self.config, "trials": trials, "aggregate": self.aggregate,
                "capacity_side": self.capacity_side, "verdicts": self.verdicts, "flags": self.flags}


# ---------------------------------------------------------------- statistics

def wilson_interval(k, n, level=0.99):
    if n == 0:
        return (0.0, 1.0)
    ci = stats.binomtest(int(k), int(n)).proportion_ci(level, method="wilson")
    return (float(ci.low), float(ci.high))


def rate_summary(k, n, level=0.99):
    lo, hi = wilson_interval(k, n, level)
    return {"hits": int(k), "trials": int(n), "rate": k / n if n else float("nan"),
            "ci": [lo, hi], "ci_level": level}


def positivity_verdict(rates, threshold=0.6, min_hits=5, level=0.99):
    """Whether the hit rate persists as delta shrinks.

    `rates` maps delta -> rate_summary. Hits are nested (a hit at the smaller
    delta is a hit at the larger one), so k(delta_min) / k(delta_max) estimates
    P(hit at delta_min | hit at delta_max). The rate is called positive iff
    at least `min_hits` trials hit at delta_max, the rate interval at delta_min
    excludes 0, and the Wilson lower bound of that conditional proportion is at
    least `threshold`. A rate decaying to 0 drives the proportion toward 0.
    """
    ds = sorted(rates)
    lo, hi = rates[ds[0]], rates[ds[-1]]
    k_lo, k_hi = lo["hits"], hi["hits"]
    q = k_lo / k_hi if k_hi else 0.0
    q_ci = wilson_interval(min(k_lo, k_hi), k_hi, level) if k_hi else (0.0, 1.0)
    positive = k_hi >= min_hits and lo["ci"][0] > 0 and q_ci[0] >= threshold
    return {"positive": bool(positive), "persistence": q, "persistence_ci": list(q_ci),
            "rule": {"threshold": threshold, "min_hits": min_hits, "ci_level": level,
                     "deltas": [ds[0], ds[-1]]}}


def _quantiles(v):
    v = np.asarray([x for x in v if x is not None and np.isfinite(x)], float)
    if v.size == 0:
        return {}
    q = np.quantile(v, [0.1, 0.25, 0.5, 0.75, 0.9])
    return {"n": int(v.size), "mean": float(v.mean()),
            "se": float(v.std(ddof=1) / np.sqrt(v.size)) if v.size > 1 else float("nan"),
            "min": float(v.min()), "max": float(v.max()),
            "q10": float(q[0]), "q25": float(q[1]), "median": float(q[2]),
            "q75": float(q[3]), "q90": float(q[4]),
            "top3": [float(x) for x in np.sort(v)[-3:][::-1]]}


# ---------------------------------------------------------------- path sampling

def cover_segments(spec, h, level=None):
    """Merged cover intervals of a time spec with per-interval step counts."""
    if level is None:
        level = cover_level_for(spec, 8 * h)
    cov = _merged_cover(spec, level)
    a, b = cov[:, 0], cov[:, 1]
    n = np.maximum(np.ceil((b - a) / h - 1e-9), 0).astype(np.int64)
    return a, b, n


def cover_path(spec, h, d, stream, level=None, block=4096, chunk=1 << 20, start=None):
    """Yield (times, values) batches of W on E's cover at step <= h.

    A skeleton at cell endpoints and every `block` steps is drawn with exact
    Gaussian increments; grid points inside each skeleton gap are then filled
    from the bridge law, one batch of at most `chunk` points at a time.
    """
    a, b, n = cover_segments(spec, h, level)
    nsk = -(-n // block) + 1
    seg = np.repeat(np.arange(a.size), nsk)
    first = np.cumsum(nsk) - nsk
    j = np.arange(seg.size) - np.repeat(first, nsk)
    k = np.minimum(j * block, np.repeat(n, nsk))
    nn = np.repeat(n, nsk)
    L = np.repeat(b - a, nsk)
    t_sk = np.repeat(a, nsk) + np.where(nn > 0, L * k / np.maximum(nn, 1), 0.0)
    keep = np.ones(t_sk.size, bool)
    keep[1:] = np.diff(t_sk) > 0
    t_sk, seg, k, nn = t_sk[keep], seg[keep], k[keep], nn[keep]
    w_sk = sample_brownian(t_sk, d, stream.child(0), start=start).values
    rng = stream.child(1).generator()
    same = seg[1:] == seg[:-1]
    counts = np.where(same, k[1:] - k[:-1] - 1, 0)
    cc = np.concatenate([[0], np.cumsum(counts)])
    ng = counts.size
    g0 = 0
    while True:
        g1 = max(g0 + 1, int(np.searchsorted(cc, cc[g0] + chunk, side="right")) - 1)
        g1 = min(g1, ng)
        c = counts[g0:g1]
        tot = int(c.sum())
        if tot:
            start_k = np.repeat(k[g0:g1], c)
            off = np.arange(tot) - np.repeat(np.cumsum(c) - c, c) + 1
            sg = np.repeat(seg[g0:g1], c)
            t_in = a[sg] + (b[sg] - a[sg]) * (start_k + off) / n[sg]
            gs = seg[g0:g1]
            w_in = bridge_fill_uniform(w_sk[g0:g1], w_sk[g0 + 1:g1 + 1], c,
                                       (b[gs] - a[gs]) / np.maximum(n[gs], 1), rng)
        else:
            t_in, w_in = np.empty(0), np.empty((0, d))
        last = g1 >= ng
        stop = g1 + 1 if last else g1
        t = np.concatenate([t_sk[g0:stop], t_in])
        w = np.vstack([w_sk[g0:stop], w_in])
        o = np.argsort(t, kind="stable")
        yield t[o], w[o]
        if last:
            return
        g0 = g1


def _space_levels(prod, delta):
    return [cover_level_for(s, delta / 4) for s in prod.space]


def _pack(keys):
    keys = np.asarray(keys, np.int64)
    if keys.ndim == 1:
        return keys
    if keys.shape[1] <= 3 and np.abs(keys).max(initial=0) < 2 ** 20:
        out = np.zeros(keys.shape[0], np.int64)
        for c in range(keys.shape[1]):
            out = (out << 21) + (keys[:, c] + 2 ** 20)
        return out
    return None


def _unpack(packed, d):
    cols = []
    for c in range(d):
        cols.append(((packed >> (21 * (d - 1 - c))) & (2 ** 21 - 1)) - 2 ** 20)
    return np.column_stack(cols)


class _Dedup:
    """Accumulates grid cells of side `res` visited by a point cloud."""

    def __init__(self, res, d):
        self.res, self.d = res, d
        self.parts, self.rows = [], []

    def add(self, pts):
        if len(pts) == 0:
            return
        keys = np.floor(np.asarray(pts).reshape(len(pts), -1) / self.res).astype(np.int64)
        p = _pack(keys)
        if p is None:
            self.rows.append(np.unique(keys, axis=0))
        else:
            self.parts.append(np.unique(p))

    def centers(self):
        cells = []
        if self.parts:
            cells.append(_unpack(np.unique(np.concatenate(self.parts)), self.d))
        if self.rows:
            cells.append(np.unique(np.vstack(self.rows), axis=0))
        if not cells:
            return np.empty((0, self.d))
        c = np.unique(np.vstack(cells), axis=0)
        return (c + 0.5) * self.res


def _image_scales(cfg, extent):
    if cfg.scales is not None:
        return sorted((float(s) for s in cfg.scales), reverse=True)
    lo = 4 * cfg.delta_eff
    hi = extent / 4
    if hi < 10 * lo:
        hi = max(0.25, 10 * lo)
    return [float(x) for x in np.geomspace(hi, lo, int(cfg.params.get("n_scales", 8)))]


def _cloud_dimension(cloud, scales):
    """Box-count slope of a deduplicated cloud; 0 for a cloud inside one cell."""
    if len(cloud) == 0:
        return None
    if len(cloud) == 1 or np.ptp(cloud, axis=0).max() < min(scales):
        return 0.0
    return euclid_box_count_dim(cloud, scales).slope


def _hit_cloud(cfg, k, want_times=False):
    """Hit points of W(E-cover) within delta of F, deduplicated at delta / 2."""
    prod, d = cfg.set, cfg.d
    delta = cfg.delta_eff
    lv = _space_levels(prod, delta)
    stream = RngStream(cfg.seed, (k,))
    img = _Dedup(delta / 2, d)
    tim = _Dedup((delta / 2) ** 2, 1)
    hits = 0
    for t, w in cover_path(prod.time, cfg.h, d, stream, chunk=int(cfg.params.get("chunk", 1 << 20))):
        near = distance_to_product(prod.space, w, lv) <= delta
        hits += int(near.sum())
        img.add(w[near])
        if want_times:
            tim.add(t[near])
    return stream, hits, img.centers(), (tim.centers()[:, 0] if want_times else None)


# ---------------------------------------------------------------- trial bodies

def _trial_intersection(cfg, k):
    t0 = time.perf_counter()
    stream, hits, cloud, _ = _hit_cloud(cfg, k)
    scales = _image_scales(cfg, cfg.set.space_diameter())
    dim = _cloud_dimension(cloud, scales)
    summ = {"cells": int(len(cloud))}
    if len(cloud):
        summ["extent"] = float(np.ptp(cloud, axis=0).max())
    return TrialRecord(k, stream.label, hits, dim, 1e3 * (time.perf_counter() - t0), summ)


def _trial_kaufman(cfg, k):
    t0 = time.perf_counter()
    stream, hits, cloud, times = _hit_cloud(cfg, k, want_times=True)
    scales = _image_scales(cfg, cfg.set.space_diameter())
    img = _cloud_dimension(cloud, scales)
    tdim = _cloud_dimension(times.reshape(-1, 1), [r * r for r in scales]) if len(times) else None
    ratio = img / tdim if img is not None and tdim else None
    summ = {"cells": int(len(cloud)), "time_cells": int(len(times)), "time_dim": tdim, "ratio": ratio}
    return TrialRecord(k, stream.label, hits, img, 1e3 * (time.perf_counter() - t0), summ)


def _adaptive_hit(prod, d, h, delta, stream, margin=3.5, max_intervals=2_000_000):
    """Does W(t), t in E-cover, come within delta of F?

    Starts from the step-h grid and bisects, by the bridge law, only intervals
    whose endpoint distances leave room for a hit: an interval [s, t] is kept
    while (dist_s + dist_t - |W_t - W_s|) / 2 - margin sqrt(d (t - s)) <= delta
    and stops at t - s <= (delta / 3)^2.
    """
    lv = _space_levels(prod, delta)
    rng = stream.child(2).generator()
    tmin = (delta / 3) ** 2
    best = np.inf
    for t, w in cover_path(prod.time, h, d, stream):
        dist = distance_to_product(prod.space, w, lv)
        best = min(best, float(dist.min()))
        if best <= delta:
            return True, best, False
        # intervals inside one cover cell only (consecutive grid steps <= h)
        dt = np.diff(t)
        ok = dt <= h * (1 + 1e-9)
        s_t, e_t = t[:-1][ok], t[1:][ok]
        s_w, e_w = w[:-1][ok], w[1:][ok]
        s_d, e_d = dist[:-1][ok], dist[1:][ok]
        while s_t.size:
            jump = np.linalg.norm(e_w - s_w, axis=1)
            lb = (s_d + e_d - jump) / 2 - margin * np.sqrt(d * (e_t - s_t))
            keep = (lb <= delta) & (e_t - s_t > tmin)
            if not keep.any():
                break
            if keep.sum() > max_intervals:
                return False, best, True
            s_t, e_t, s_w, e_w, s_d, e_d = (v[keep] for v in (s_t, e_t, s_w, e_w, s_d, e_d))
            m_t = (s_t + e_t) / 2
            m_w = (s_w + e_w) / 2 + np.sqrt((e_t - s_t) / 4)[:, None] * rng.standard_normal(s_w.shape)
            m_d = distance_to_product(prod.space, m_w, lv)
            best = min(best, float(m_d.min()))
            if best <= delta:
                return True, best, False
            s_t, e_t = np.concatenate([s_t, m_t]), np.concatenate([m_t, e_t])
            s_w, e_w = np.vstack([s_w, m_w]), np.vstack([m_w, e_w])
            s_d, e_d = np.concatenate([s_d, m_d]), np.concatenate([m_d, e_d])
    return False, best, False


def _deltas(cfg):
    ds = cfg.params.get("deltas")
    return sorted(float(x) for x in ds) if ds else [cfg.delta_eff]


def _trial_hitting(cfg, k):
    t0 = time.perf_counter()
    stream = RngStream(cfg.seed, (k,))
    hit, capped = {}, False
    margin = float(cfg.params.get("margin", 3.5))
    missed = False
    # largest delta first; a miss there is a miss at every smaller delta
    for de in sorted(_deltas(cfg), reverse=True):
        if missed:
            hit[de] = False
            continue
        hit[de], best, cap = _adaptive_hit(cfg.set, cfg.d, cfg.h, de, stream, margin)
        capped = capped or cap
        missed = not hit[de]
    summ = {"hit": {repr(de): bool(v) for de, v in hit.items()}, "capped": capped}
    return TrialRecord(k, stream.label, int(hit[min(hit)]), None,
                       1e3 * (time.perf_counter() - t0), summ)


def _trial_additive(cfg, k):
    t0 = time.perf_counter()
    prod, d = cfg.set, cfg.d
    p = cfg.params
    alpha, N = float(p.get("alpha", 0.5)), int(p.get("N", 1))
    du = float(p.get("du", 1e-3))
    window = p.get("window", [1.0, 1.5])
    deltas = _deltas(cfg)
    dmax = max(deltas)
    stream = RngStream(cfg.seed, (k,))
    grid = np.linspace(window[0], window[1], int(round((window[1] - window[0]) / du)) + 1)
    fld = sample_additive_field(alpha, N, d, [grid] * N, stream.child(3))
    tree = cKDTree(fld.image())
    lv = _space_levels(prod, min(deltas))
    best = np.inf
    cand = 0
    for t, w in cover_path(prod.time, cfg.h, d, stream):
        df = distance_to_product(prod.space, w, lv)
        near = df <= dmax
        if near.any():
            cand += int(near.sum())
            dd, _ = tree.query(w[near])
            best = min(best, float(np.min(np.maximum(dd, df[near]))))
    summ = {"min_distance": best, "candidates": cand,
            "hit": {repr(de): bool(best <= de) for de in deltas}}
    return TrialRecord(k, stream.label, int(best <= min(deltas)), None,
                       1e3 * (time.perf_counter() - t0), summ)


def _box_mass(w, box, n):
    """prod_k [Phi(sqrt(n)(b_k - w_k)) - Phi(sqrt(n)(a_k - w_k))] per atom."""
    out = np.ones(w.shape[0])
    sq = math.sqrt(n)
    for c, (a, b) in enumerate(box):
        out *= stats.norm.cdf(sq * (b - w[:, c])) - stats.norm.cdf(sq * (a - w[:, c]))
    return out


def _random_measure_setup(cfg):
    prod = cfg.set
    box = []
    for s in prod.space:
        if isinstance(s, FinitePointSet) or not s.full:
            raise ConfigError("random_measure needs every space factor to be an interval")
        box.append(tuple(s.ambient))
    lvl = int(cfg.params.get("sigma_level", 10))
    nm = natural_measure(prod.time, min(lvl, prod.time.level_cap))
    ns = [float(x) for x in cfg.params.get("n_values", [10, 100, 1000, 10000])]
    return box, nm.atoms, nm.weights, ns


def _trial_random_measure(cfg, k):
    t0 = time.perf_counter()
    box, s, sig, ns = _random_measure_setup(cfg)
    stream = RngStream(cfg.seed, (k,))
    w = sample_brownian(s, cfg.d, stream).values
    mass = {repr(n): float((2 * np.pi) ** cfg.d * sig @ _box_mass(w, box, n)) for n in ns}
    return TrialRecord(k, stream.label, 0, None, 1e3 * (time.perf_counter() - t0), {"mass": mass})


def random_measure_mean(box, s, sig, n, d, drop_2pi=False):
    """E|nu_n| = (2 pi)^d sum_i sigma_i prod_k [Phi(b_k / v_i) - Phi(a_k / v_i)], v_i = sqrt(s_i + 1/n).

    With drop_2pi=True the (2 pi)^d factor is dropped, which is the
    Gaussian-density form of the same integral.
    """
    v = np.sqrt(np.asarray(s) + 1.0 / n)
    out = np.ones(v.size)
    for a, b in box:
        out *= stats.norm.cdf(b / v) - stats.norm.cdf(a / v)
    c = 1.0 if drop_2pi else (2 * np.pi) ** d
    return float(c * np.asarray(sig) @ out)


# ---------------------------------------------------------------- orchestration

_TRIAL_FN = {
    "intersection_dim": _trial_intersection,
    "kaufman_check": _trial_kaufman,
    "hitting_probability": _trial_hitting,
    "additive_hitting": _trial_additive,
    "random_measure": _trial_random_measure,
}


def _run_one(args):
    cfg_dict, k = args
    cfg = ExperimentConfig.from_dict(cfg_dict)
    return _TRIAL_FN[cfg.kind](cfg, k)


def run_trials(cfg, order=None, workers=None):
    """Run every trial and return records sorted by trial index."""
    idx = list(range(cfg.trials)) if order is None else list(order)
    if sorted(idx) != list(range(cfg.trials)):
        raise ConfigError("order must be a permutation of the trial indices")
    workers = int(workers or cfg.params.get("workers", 1))
    fn = _TRIAL_FN[cfg.kind]
    if workers > 1:
        with ProcessPoolExecutor(workers) as ex:
            recs = list(ex.map(_run_one, [(cfg.to_dict(), k) for k in idx]))
    else:
        recs = [fn(cfg, k) for k in idx]
    return sorted(recs, key=lambda r: r.trial)


def _dim_rho_side(cfg):
    out = {}
    try:
        rep = estimate_dim_rho(cfg.set)
        out["dim_rho"] = rep.slope
        out["dim_rho_minus_d"] = rep.slope - cfg.d
        out["dim_rho_label"] = rep.label
    except ValueError as e:
        out["dim_rho_error"] = str(e)
    return out


def _delta_side(cfg):
    g = cfg.gamma_grid
    lv = cfg.levels
    gammas = None
    if g:
        gammas = list(np.round(np.arange(g["min"], g["max"] + 1e-9, g["step"]), 10))
    levels = list(range(lv["min"], lv["max"] + 1)) if lv else None
    est = estimate_delta(cfg.set, gammas=gammas, levels=levels)
    return {"delta": est.delta, "boundary": est.boundary, "delta_flags": est.flags}


def _finite_at(prod, gamma, levels=None):
    """FINITE/INFINITE classification of a single gamma by the growth rule."""
    est = estimate_delta(prod, gammas=[gamma], levels=levels)
    return bool(est.finite[0]), float(est.ratios[0])


def run_intersection_dim(cfg, order=None):
    recs = run_trials(cfg, order)
    dims = [r.dim_estimate for r in recs]
    hit_trials = sum(r.hits > 0 for r in recs)
    agg = {"dimension": _quantiles(dims), "sup_proxy": None, "sup_proxy_label": SUP_PROXY_LABEL,
           "hit_rate": rate_summary(hit_trials, len(recs)), "delta_eff": cfg.delta_eff,
           "scales": _image_scales(cfg, cfg.set.space_diameter())}
    flags = list(cfg.advisories) + [DISCRETIZATION_FLAG]
    if agg["dimension"]:
        agg["sup_proxy"] = agg["dimension"]["max"]
    cap = _dim_rho_side(cfg)
    if cfg.set.space_null():
        cap["thermal_capacity_positive"], _ = _thermal(cfg.set)
    if cfg.params.get("capacity_side"):
        cap.update(_delta_side(cfg))
    verdicts = {}
    if hit_trials == 0:
        verdicts["no_hit"] = True
    else:
        target = cap.get("dim_rho_minus_d")
        if target is not None:
            worst = max(x for x in dims if x is not None)
            verdicts["upper_bound_holds"] = bool(worst <= target + 0.2)
            verdicts["upper_bound_rule"] = "every trial estimate <= dim_rho - d + 0.2"
    return ExperimentReport(cfg.to_dict(), recs, agg, cap, verdicts, flags)


def _thermal(prod):
    ok, rep = thermal_capacity_positive(prod)
    return bool(ok), rep


def run_kaufman_check(cfg, order=None):
    if cfg.d < 2:
        raise ConfigError("kaufman_check needs d >= 2")
    recs = run_trials(cfg, order)
    min_cells = int(cfg.params.get("min_cells", 100))
    rich = [r for r in recs if r.summary["cells"] >= min_cells and r.summary["ratio"] is not None]
    agg = {"image_dimension": _quantiles([r.dim_estimate for r in rich]),
           "time_dimension": _quantiles([r.summary["time_dim"] for r in rich]),
           "ratio": _quantiles([r.summary["ratio"] for r in rich]),
           "hit_rich_trials": len(rich), "skipped_trials": len(recs) - len(rich),
           "min_cells": min_cells, "delta_eff": cfg.delta_eff}
    cap = _dim_rho_side(cfg)
    if "dim_rho" in cap:
        cap["time_side_prediction"] = cap["dim_rho_minus_d"] / 2
    verdicts = {}
    if rich:
        med = agg["ratio"]["median"]
        verdicts["ratio_median"] = med
        verdicts["ratio_near_two"] = bool(abs(med - 2) <= 0.3)
    return ExperimentReport(cfg.to_dict(), recs, agg, cap, verdicts,
                            list(cfg.advisories) + [DISCRETIZATION_FLAG])


def _rates_by_delta(recs, deltas):
    out = {}
    for de in deltas:
        k = sum(r.summary["hit"][repr(de)] for r in recs)
        out[de] = rate_summary(k, len(recs))
    return out


def point_hit_probability(a, b):
    """P(1-d Brownian motion from 0 vanishes somewhere in [a, b]) = (2/pi) arccos(sqrt(a/b))."""
    return 2 / np.pi * np.arccos(np.sqrt(a / b))


def run_hitting_probability(cfg, order=None):
    recs = run_trials(cfg, order)
    deltas = _deltas(cfg)
    rates = _rates_by_delta(recs, deltas)
    v = positivity_verdict(rates, float(cfg.params.get("threshold", 0.6)))
    cap = {}
    if cfg.set.space_null():
        cap["thermal_capacity_positive"], rep = _thermal(cfg.set)
        cap["thermal_report"] = rep
    else:
        cap["thermal_capacity_positive"] = True
        cap["note"] = "F has positive Lebesgue measure"
    prod = cfg.set
    if cfg.d == 1 and all(s.is_point for s in prod.space) and prod.time.full:
        pts = prod.space[0].midpoints(0)
        if len(pts) == 1 and pts[0] == 0:
            a, b = prod.time.ambient
            cap["closed_form_hit_probability"] = float(point_hit_probability(a, b))
    verdicts = dict(v)
    verdicts["agrees_with_capacity"] = bool(v["positive"] == cap["thermal_capacity_positive"])
    agg = {"rates": {repr(k): r for k, r in rates.items()},
           "capped_trials": sum(r.summary["capped"] for r in recs)}
    return ExperimentReport(cfg.to_dict(), recs, agg, cap, verdicts,
                            list(cfg.advisories) + [DISCRETIZATION_FLAG])


def run_additive_hitting(cfg, order=None):
    p = cfg.params
    alpha, N = float(p.get("alpha", 0.5)), int(p.get("N", 1))
    if not cfg.d > alpha * N:
        raise ConfigError("additive_hitting needs d > alpha N")
    recs = run_trials(cfg, order)
    deltas = _deltas(cfg)
    rates = _rates_by_delta(recs, deltas)
    v = positivity_verdict(rates, float(p.get("threshold", 0.6)))
    gamma = cfg.d - alpha * N
    cap = {"gamma": gamma}
    if alpha == 2:
        cap["note"] = "alpha = 2: the field is a second Brownian motion; reported qualitatively"
    else:
        levels = list(range(cfg.levels["min"], cfg.levels["max"] + 1)) if cfg.levels else None
        fin, stat = _finite_at(cfg.set, gamma, levels)
        cap["capacity_positive"] = fin
        cap["growth_statistic"] = stat
    verdicts = dict(v)
    if "capacity_positive" in cap:
        verdicts["agrees_with_capacity"] = bool(v["positive"] == cap["capacity_positive"])
    agg = {"rates": {repr(k): r for k, r in rates.items()}, "alpha": alpha, "N": N,
           "du": float(p.get("du", 1e-3))}
    flags = list(cfg.advisories) + [DISCRETIZATION_FLAG,
                                    "field image is a lattice thickened by delta, not its closure"]
    return ExperimentReport(cfg.to_dict(), recs, agg, cap, verdicts, flags)


def run_random_measure(cfg, order=None):
    box, s, sig, ns = _random_measure_setup(cfg)
    recs = run_trials(cfg, order)
    d = cfg.d
    upper = (2 * np.pi) ** d
    rows = {}
    for n in ns:
        m = np.array([r.summary["mass"][repr(n)] for r in recs])
        se = float(m.std(ddof=1) / np.sqrt(m.size)) if m.size > 1 else float("nan")
        exact = random_measure_mean(box, s, sig, n, d)
        rows[repr(n)] = {"mean": float(m.mean()), "se": se, "max": float(m.max()),
                         "quadrature": exact,
                         "quadrature_without_2pi_d": random_measure_mean(box, s, sig, n, d, True),
                         "z": (float(m.mean()) - exact) / se if se > 0 else 0.0}
    z99 = stats.norm.ppf(0.995)
    c1 = min(v["mean"] - z99 * v["se"] for v in rows.values())
    verdicts = {"c1": c1, "c1_positive": bool(c1 > 0),
                "upper_bound": upper,
                "upper_bound_respected": bool(all(v["max"] <= upper * (1 + 1e-12) for v in rows.values())),
                "matches_quadrature": bool(all(abs(v["z"]) <= 3 for v in rows.values()))}
    agg = {"by_n": rows, "sigma_atoms": int(len(s))}
    return ExperimentReport(cfg.to_dict(), recs, agg, {}, verdicts, list(cfg.advisories))


def _rect_hits(d, r, n_trials, rng, center, steps=400, importance=True, at_start=False):
    """Weighted hit indicators for W([1, 1 + r^2]) meeting the ball B(center, r)."""
    if at_start:
        w1 = rng.standard_normal((n_trials, d))
        c = w1
        lw = np.zeros(n_trials)
    else:
        c = np.broadcast_to(np.asarray(center, float), (n_trials, d))
        if importance:
            sd = 2 * r
            w1 = c + sd * rng.standard_normal((n_trials, d))
            # log p(w1) - log q(w1) for p = N(0, I), q = N(c, sd^2 I)
            lw = (-0.5 * (w1 ** 2).sum(1) + 0.5 * ((w1 - c) ** 2).sum(1) / sd ** 2 + d * np.log(sd))
        else:
            w1 = rng.standard_normal((n_trials, d))
            lw = np.zeros(n_trials)
    hit = np.linalg.norm(w1 - c, axis=1) <= r
    pos = w1.copy()
    dt = r * r / steps
    for _ in range(steps):
        pos += math.sqrt(dt) * rng.standard_normal(pos.shape)
        hit |= np.linalg.norm(pos - c, axis=1) <= r
    return hit * np.exp(lw)


def run_rectangle_hitting(cfg, order=None):
    p = cfg.params
    d = cfg.d
    radii = [float(x) for x in p.get("radii", [2.0 ** -k for k in range(1, 5)])]
    n = int(p.get("trials_per_scale", 10_000))
    steps = int(p.get("steps", 400))
    center = p.get("center", [1.0] + [0.0] * (d - 1))
    importance = bool(p.get("importance", True))
    at_start = bool(p.get("center_at_start", False))
    idx = list(range(len(radii))) if order is None else list(order)
    recs = []
    for i in idx:
        t0 = time.perf_counter()
        stream = RngStream(cfg.seed, (i,))
        wts = _rect_hits(d, radii[i], n, stream.generator(), center, steps, importance, at_start)
        est = float(wts.mean())
        se = float(wts.std(ddof=1) / np.sqrt(n))
        recs.append(TrialRecord(i, stream.label, int((wts > 0).sum()), None,
                                1e3 * (time.perf_counter() - t0),
                                {"radius": radii[i], "probability": est, "se": se}))
    recs.sort(key=lambda r: r.trial)
    probs = np.array([r.summary["probability"] for r in recs])
    agg = {"radii": radii, "probabilities": probs.tolist(),
           "se": [r.summary["se"] for r in recs], "trials_per_scale": n, "steps": steps,
           "importance_sampling": importance and not at_start}
    verdicts = {}
    if at_start:
        verdicts["all_near_one"] = bool(np.all(probs >= 0.99))
    elif np.all(probs > 0):
        x, y = np.log(radii), np.log(probs)
        slope, icpt = (float(v) for v in np.polyfit(x, y, 1))
        res = float(np.max(np.abs(y - (slope * x + icpt))))
        agg["fit"] = {"slope": slope, "intercept": icpt, "residual": res}
        verdicts["slope"] = slope
        verdicts["slope_near_d"] = bool(abs(slope - d) <= 0.3)
    return ExperimentReport(cfg.to_dict(), recs, agg, {}, verdicts, [])


RUNNERS = {
    "intersection_dim": run_intersection_dim,
    "hitting_probability": run_hitting_probability,
    "rectangle_hitting": run_rectangle_hitting,
    "kaufman_check": run_kaufman_check,
    "additive_hitting": run_additive_hitting,
    "random_measure": run_random_measure,
}


def run_experiment(cfg, order=None):
    try:
        return RUNNERS[cfg.kind](cfg, order)
    except FloatingPointError as e:
        raise NumericalError(str(e)) from e


# ---------------------------------------------------------------- persistence

def _fmt(v):
    if v is None:
        return ""
    if isinstance(v, float):
        return repr(v)
    return str(v)


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, (np.floating,)):
        obj = float(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.bool_,)):
        return bool(obj)
    if isinstance(obj, float) and not math.isfinite(obj):
        return repr(obj)
    if hasattr(obj, "to_dict"):
        return _jsonable(obj.to_dict())
    return obj


def write_report(report, out_dir, cfg=None):
    """report.json, trials.csv, timings.csv, manifest.json and fit plots."""
    os.makedirs(out_dir, exist_ok=True)
    with open(os.path.join(out_dir, "report.json"), "w") as fh:
        json.dump(_jsonable(report.to_dict()), fh, indent=2, sort_keys=True)
    with open(os.path.join(out_dir, "trials.csv"), "w", newline="") as fh:
        wr = csv.writer(fh, lineterminator="\n")
        wr.writerow(["trial", "stream", "hits", "dim_estimate"])
        for r in report.trials:
            wr.writerow([r.trial, r.stream, r.hits, _fmt(r.dim_estimate)])
    with open(os.path.join(out_dir, "timings.csv"), "w", newline="") as fh:
        wr = csv.writer(fh, lineterminator="\n")
        wr.writerow(["trial", "runtime_ms"])
        for r in report.trials:
            wr.writerow([r.trial, f"{r.runtime_ms:.3f}"])
    cfg_dict = report.config
    manifest = {"seed": cfg_dict.get("seed"), "version": __version__,
                "config_hash": hashlib.sha256(json.dumps(cfg_dict, sort_keys=True).encode()).hexdigest(),
                "kind": cfg_dict.get("kind"), "trials": len(report.trials)}
    with open(os.path.join(out_dir, "manifest.json"), "w") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
    plot_fit(report, out_dir)
    return out_dir


def plot_fit(report, out_dir):
    """Static SVG of the log-log data and fitted line, where one exists."""
    try:
        import matplotlib
        matplotlib.use("Agg")
        import matplotlib.pyplot as plt
    except ImportError:
        return None
    kind = report.config.get("kind")
    if kind == "rectangle_hitting" and "fit" in report.aggregate:
        x = np.array(report.aggregate["radii"])
        y = np.array(report.aggregate["probabilities"])
        fit = report.aggregate["fit"]
        xl, yl = "radius r", "P(hit)"
        line = np.exp(fit["intercept"]) * x ** fit["slope"]
    elif kind == "random_measure":
        rows = report.aggregate["by_n"]
        x = np.array([float(k) for k in rows])
        y = np.array([v["mean"] for v in rows.values()])
        line = np.array([v["quadrature"] for v in rows.values()])
        xl, yl = "n", "E|nu_n|"
    else:
        return None
    fig, ax = plt.subplots(figsize=(5, 4))
    ax.loglog(x, y, "o", label="estimate")
    ax.loglog(x, line, "-", label="fit" if kind != "random_measure" else "quadrature")
    ax.set_xlabel(xl)
    ax.set_ylabel(yl)
    ax.legend()
    path = os.path.join(out_dir, "fit.svg")
    fig.savefig(path, format="svg", metadata={"Date": None})
    plt.close(fig)
    return path
