"""Parabolic metric on space-time and box-counting dimension estimators."""
from dataclasses import dataclass, field, asdict
from typing import NamedTuple

import numpy as np

from .fractal_sets import ProductSetSpec, _merged_cover, cover_level_for

BOX_LABEL = "box dimension (upper bound proxy)"
_EPS = 1e-9


class SpaceTimePoint(NamedTuple):
    t: float
    x: tuple


def _as_x(x):
    return np.atleast_1d(np.asarray(x, dtype=float))


def rho(p, q):
    """max(|t - s|^{1/2}, ||x - y||)."""
    dt = abs(float(p[0]) - float(q[0]))
    dx = np.linalg.norm(_as_x(p[1]) - _as_x(q[1]))
    return float(max(np.sqrt(dt), dx))


def rho_matrix(t1, x1, t2=None, x2=None):
    """Pairwise parabolic distances between two atom sets."""
    if t2 is None:
        t2, x2 = t1, x1
    t1, t2 = np.asarray(t1, float), np.asarray(t2, float)
    x1 = np.asarray(x1, float).reshape(t1.size, -1)
    x2 = np.asarray(x2, float).reshape(t2.size, -1)
    dt = np.abs(t1[:, None] - t2[None, :])
    dx2 = ((x1[:, None, :] - x2[None, :, :]) ** 2).sum(-1)
    return np.sqrt(np.maximum(dt, dx2))


@dataclass
class BoxCountReport:
    scales: list
    counts: list
    slope: float
    intercept: float
    fit_window: tuple
    residual: float
    label: str = BOX_LABEL
    offset_slope: float = None
    notes: list = field(default_factory=list)

    def to_dict(self):
        out = asdict(self)
        out["fit_window"] = list(self.fit_window)
        return out

    def rows(self):
        """CSV rows: scale, count, log_inv_scale, log_count."""
        return [(r, c, float(np.log(1 / r)), float(np.log(c)) if c > 0 else float("-inf"))
                for r, c in zip(self.scales, self.counts)]


def loglog_fit(scales, counts, trim=2):
    """Least-squares slope of log N against log(1/r) after trimming both ends."""
    r = np.asarray(scales, float)
    n = np.asarray(counts, float)
    order = np.argsort(-r)
    r, n = r[order], n[order]
    k = len(r)
    t = trim if k - 2 * trim >= 3 else max(0, (k - 3) // 2)
    lo, hi = t, k - t
    x = np.log(1 / r[lo:hi])
    y = np.log(np.maximum(n[lo:hi], 1))
    if len(x) < 2 or np.ptp(x) == 0:
        raise ValueError("degenerate scale range")
    slope, icpt = np.polyfit(x, y, 1)
    res = float(np.max(np.abs(y - (slope * x + icpt))))
    return float(slope), float(icpt), (lo, hi), res, r, n


def _report(scales, counts, trim=2, notes=None):
    slope, icpt, win, res, r, n = loglog_fit(scales, counts, trim)
    return BoxCountReport([float(v) for v in r], [int(v) for v in n], slope, icpt, win, res,
                          notes=list(notes or []))


def parabolic_cells(times, xs, r, offset=0.0):
    t = np.asarray(times, float).reshape(-1)
    x = np.asarray(xs, float).reshape(t.size, -1)
    kt = np.floor(t / r ** 2 + offset).astype(np.int64)
    kx = np.floor(x / r + offset).astype(np.int64)
    return np.column_stack([kt, kx])


def _count_rows(keys):
    if keys.shape[0] == 0:
        return 0
    keys = keys - keys.min(axis=0)
    span = keys.max(axis=0) + 1
    if np.prod(span.astype(float)) < 2.0 ** 62:
        flat = np.zeros(keys.shape[0], dtype=np.int64)
        for j in range(keys.shape[1]):
            flat = flat * int(span[j]) + keys[:, j]
        return int(np.unique(flat).size)
    return int(np.unique(keys, axis=0).shape[0])


def parabolic_box_count(points, r, offset=0.0):
    """Occupied cells of the grid with time side r^2 and space side r.

    `points` is a list of (t, x) pairs or a (times, xs) tuple of arrays.
    """
    if r <= 0:
        raise ValueError("r must be positive")
    if isinstance(points, tuple) and len(points) == 2 and np.ndim(points[0]) == 1 and not np.isscalar(points[0]):
        times, xs = points
    else:
        if len(points) == 0:
            return 0
        times = np.array([float(p[0]) for p in points])
        xs = np.array([_as_x(p[1]) for p in points])
    if np.size(times) == 0:
        return 0
    return _count_rows(parabolic_cells(times, xs, r, offset))


def axis_cell_count(spec, r, level=None, offset=0.0):
    """Grid cells [k r, (k+1) r) meeting the level cover of a 1-D spec.

    A cell counts when the cover interval meets its interior; a degenerate
    interval (a point) counts in the cell containing it.
    """
    if level is None:
        level = cover_level_for(spec, r / 8)
    cov = _merged_cover(spec, level)
    a = cov[:, 0] / r + offset
    b = cov[:, 1] / r + offset
    # float slack relative to the magnitude of the cell index
    tol = _EPS + 1e-12 * np.abs(b)
    point = b - a < tol
    lo = np.floor(a + tol).astype(np.int64)
    hi = np.where(point, np.floor(a + tol), np.ceil(b - tol) - 1).astype(np.int64)
    hi = np.maximum(hi, lo)
    total = int(np.sum(hi - lo + 1))
    if len(lo) > 1:
        total -= int(np.sum(np.maximum(0, hi[:-1] - lo[1:] + 1)))
    return total


def parabolic_cover_count(prod, r, offset=0.0):
    """Exact occupied-cell count of the product cover on the parabolic grid."""
    n = axis_cell_count(prod.time, r * r, offset=offset)
    for s in prod.space:
        n *= axis_cell_count(s, r, offset=offset)
    return n


def default_scales(base=3.0, kmin=1, kmax=9):
    return [base ** -k for k in range(kmin, kmax + 1)]


def estimate_dim_rho(prod, scales=None, offset_pass=False):
    """Box-counting slope of E x F in the parabolic metric from exact covers."""
    if scales is None:
        scales = default_scales()
    scales = sorted((float(s) for s in scales), reverse=True)
    if len(scales) < 3 or np.log10(scales[0] / scales[-1]) < 1.5 - 1e-9:
        raise ValueError("scale range must hold >= 3 scales spanning >= 1.5 decades")
    counts = [parabolic_cover_count(prod, r) for r in scales]
    rep = _report(scales, counts)
    if offset_pass:
        off = [parabolic_cover_count(prod, r, offset=0.5) for r in scales]
        rep.offset_slope = _report(scales, off).slope
    return rep


def euclid_cells(points, r, offset=0.0):
    p = np.asarray(points, float)
    if p.ndim == 1:
        p = p.reshape(-1, 1)
    return np.floor(p / r + offset).astype(np.int64)


def euclid_box_count(points, r, offset=0.0):
    p = np.asarray(points, float)
    if p.size == 0:
        return 0
    return _count_rows(euclid_cells(p, r, offset))


def euclid_box_count_dim(points, scales, trim=2, offset_pass=False):
    """Box-counting slope of a point cloud with isotropic cubes of side r."""
    scales = sorted((float(s) for s in scales), reverse=True)
    counts = [euclid_box_count(points, r) for r in scales]
    rep = _report(scales, counts, trim)
    if offset_pass:
        rep.offset_slope = _report(scales, [euclid_box_count(points, r, 0.5) for r in scales], trim).slope
    return rep
