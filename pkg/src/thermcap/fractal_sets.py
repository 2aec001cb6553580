"""Self-similar Cantor-type test sets, their covers and natural measures.

Sets are kept symbolic (spec + level). The level-n cover of a spec with m
copies of ratio r is the list of m^n intervals produced by n steps of the
iterated function system; cells are indexed left to right so that the base-m
digits of an index are the IFS address of the cell.
"""
from dataclasses import dataclass
from functools import lru_cache
from typing import Sequence

import numpy as np

from .measure import DiscreteMeasure

MAX_ATOMS = 10 ** 7
MAX_CELLS = 1 << 24


class LevelCapError(ValueError):
    pass


@dataclass(frozen=True)
class SelfSimilarSpec:
    """m copies of [a, b] scaled by `ratio`, spread evenly from a to b.

    copies == 1 keeps the single copy centred, so the limit set is the midpoint.
    """
    ambient: tuple
    ratio: float
    copies: int
    level_cap: int = 40

    def __post_init__(self):
        a, b = (float(v) for v in self.ambient)
        object.__setattr__(self, "ambient", (a, b))
        if not b > a:
            raise ValueError("ambient interval must have b > a")
        if not (0 < self.ratio <= 0.5):
            raise ValueError("ratio must lie in (0, 1/2]")
        if int(self.copies) != self.copies or self.copies < 1:
            raise ValueError("copies must be a positive integer")
        if self.copies * self.ratio > 1 + 1e-12:
            raise ValueError("copies * ratio must be <= 1")

    @property
    def m(self):
        return int(self.copies)

    @property
    def length(self):
        return self.ambient[1] - self.ambient[0]

    @property
    def is_point(self):
        return self.m == 1

    @property
    def full(self):
        return abs(self.m * self.ratio - 1) < 1e-12

    def dimension(self):
        return float(np.log(self.m) / np.log(1.0 / self.ratio))

    def cell_length(self, level):
        return self.length * self.ratio ** level

    def count(self, level):
        return self.m ** level

    def check_level(self, level):
        if level < 0 or level > self.level_cap:
            raise LevelCapError(f"level {level} outside [0, {self.level_cap}]")
        if self.m ** level > MAX_CELLS:
            raise LevelCapError(f"level {level} gives {self.m ** level} cells (limit {MAX_CELLS})")

    def _offsets(self):
        # left-endpoint offsets of the m children inside a parent of unit length
        m, r = self.m, self.ratio
        if m == 1:
            return np.array([(1 - r) / 2])
        return np.arange(m) * (1 - r) / (m - 1)

    def lefts(self, level):
        self.check_level(level)
        return _lefts(self, level).copy()

    def cover(self, level):
        lo = self.lefts(level)
        return np.column_stack([lo, lo + self.cell_length(level)])

    def midpoints(self, level):
        return self.lefts(level) + 0.5 * self.cell_length(level)

    def to_dict(self):
        return {"ambient": list(self.ambient), "ratio": self.ratio, "copies": self.m}


@lru_cache(maxsize=64)
def _lefts(spec, level):
    a = spec.ambient[0]
    lo = np.array([a])
    off = spec._offsets()
    for k in range(level):
        lo = (lo[:, None] + off[None, :] * spec.cell_length(k)).reshape(-1)
    lo.setflags(write=False)
    return lo


@dataclass(frozen=True)
class FinitePointSet:
    """An explicit finite set of reals, e.g. (0.0,) for F = {0}."""
    points: tuple = (0.0,)
    level_cap: int = 40

    def __post_init__(self):
        pts = tuple(sorted(float(p) for p in self.points))
        if not pts:
            raise ValueError("point set must be nonempty")
        object.__setattr__(self, "points", pts)

    m = 1
    ratio = 0.5
    full = False
    is_point = True

    @property
    def ambient(self):
        return (self.points[0], self.points[-1])

    def dimension(self):
        return 0.0

    def cell_length(self, level):
        return 0.0

    def count(self, level):
        return len(self.points)

    def check_level(self, level):
        if level < 0 or level > self.level_cap:
            raise LevelCapError(f"level {level} outside [0, {self.level_cap}]")

    def lefts(self, level):
        self.check_level(level)
        return np.array(self.points)

    def cover(self, level):
        p = self.lefts(level)
        return np.column_stack([p, p])

    def midpoints(self, level):
        return self.lefts(level)

    def to_dict(self):
        return {"points": list(self.points)}


def spec_from_dict(obj):
    if "points" in obj:
        return FinitePointSet(tuple(obj["points"]))
    return SelfSimilarSpec(tuple(obj["ambient"]), float(obj["ratio"]), int(obj["copies"]),
                           int(obj.get("level_cap", 40)))


def middle_thirds(a=0.0, b=1.0):
    return SelfSimilarSpec((a, b), 1 / 3, 2)


def interval(a, b):
    return SelfSimilarSpec((a, b), 0.5, 2)


@dataclass(frozen=True)
class ProductSetSpec:
    """E x F with E a time spec and F a product of d per-axis specs."""
    time: SelfSimilarSpec
    space: tuple
    d: int = None

    def __post_init__(self):
        space = tuple(self.space)
        object.__setattr__(self, "space", space)
        d = len(space) if self.d is None else int(self.d)
        object.__setattr__(self, "d", d)
        if len(space) != d:
            raise ValueError(f"space has {len(space)} axes but d = {d}")
        if not isinstance(self.time, SelfSimilarSpec):
            raise ValueError("time set must be a SelfSimilarSpec")
        if self.time.ambient[0] <= 0:
            raise ValueError("time ambient interval must lie in (0, inf)")

    def space_dimension(self):
        return float(sum(s.dimension() for s in self.space))

    def space_null(self):
        """True when F has zero Lebesgue measure."""
        return any(not s.full for s in self.space)

    def space_diameter(self):
        return float(np.sqrt(sum((s.ambient[1] - s.ambient[0]) ** 2 for s in self.space)))

    def to_dict(self):
        return {"time": self.time.to_dict(), "space": [s.to_dict() for s in self.space], "d": self.d}

    @classmethod
    def from_dict(cls, obj):
        space = [spec_from_dict(s) for s in obj["space"]]
        return cls(spec_from_dict(obj["time"]), tuple(space), int(obj.get("d", len(space))))


def build_cover(spec, level):
    """Level-n cover as an (m^n, 2) array of [left, right] rows, left to right."""
    return spec.cover(level)


def hausdorff_dimension(spec):
    return spec.dimension()


@lru_cache(maxsize=128)
def _merged_cover(spec, level):
    cov = spec.cover(level)
    if len(cov) > 1:
        # glue touching cells, the union is what matters for distances
        brk = np.flatnonzero(cov[1:, 0] > cov[:-1, 1] + 1e-15 * max(1.0, abs(cov[-1, 1])))
        lo = cov[np.r_[0, brk + 1], 0]
        hi = cov[np.r_[brk, len(cov) - 1], 1]
        cov = np.column_stack([lo, hi])
    cov.setflags(write=False)
    return cov


def distance_to_set(spec, point, level):
    """Distance from point(s) to the union of the level-n cover cells."""
    cov = _merged_cover(spec, level)
    p = np.asarray(point, dtype=float)
    if len(cov) == 1:
        best = np.maximum(0.0, np.maximum(cov[0, 0] - p, p - cov[0, 1]))
        return float(best) if best.ndim == 0 else best
    i = np.searchsorted(cov[:, 0], p, side="right") - 1
    best = np.full(p.shape, np.inf)
    for j in (i, i + 1):
        ok = (j >= 0) & (j < len(cov))
        jj = np.clip(j, 0, len(cov) - 1)
        dist = np.maximum(0.0, np.maximum(cov[jj, 0] - p, p - cov[jj, 1]))
        best = np.where(ok, np.minimum(best, dist), best)
    return float(best) if best.ndim == 0 else best


def distance_to_product(space, points, levels):
    """Euclidean distance from points (n, d) to the product of per-axis covers."""
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    if np.isscalar(levels):
        levels = [levels] * len(space)
    acc = np.zeros(pts.shape[0])
    for k, (s, lv) in enumerate(zip(space, levels)):
        acc += distance_to_set(s, pts[:, k], lv) ** 2
    return np.sqrt(acc)


def cover_level_for(spec, resolution):
    """Smallest level whose cells are no longer than `resolution` (capped)."""
    if spec.is_point:
        return 0
    n = 0
    while spec.cell_length(n) > resolution and n < spec.level_cap and spec.m ** (n + 1) <= MAX_CELLS:
        n += 1
    return n


@dataclass
class NaturalMeasureLevel:
    level: int
    atoms: np.ndarray
    weights: np.ndarray


def natural_measure(spec, level):
    """Uniform weights on level-n cell midpoints.

    For a ProductSetSpec, `level` is an int or a (time_level, space_level)
    pair and the result is the product measure on the product grid.
    """
    if isinstance(spec, ProductSetSpec):
        tl, sl = (level, level) if np.isscalar(level) else level
        return _product_measure(spec, tl, sl)
    spec.check_level(level)
    if spec.count(level) > MAX_ATOMS:
        raise LevelCapError("atom count exceeds 1e7")
    mids = spec.midpoints(level)
    return NaturalMeasureLevel(level, mids, np.full(mids.size, 1.0 / mids.size))


def _space_grid(space, level):
    axes = [s.midpoints(level) for s in space]
    mesh = np.meshgrid(*axes, indexing="ij")
    return np.column_stack([g.reshape(-1) for g in mesh])


def _product_measure(prod, tl, sl):
    n_t = prod.time.count(tl)
    n_s = int(np.prod([s.count(sl) for s in prod.space]))
    if n_t * n_s > MAX_ATOMS:
        raise LevelCapError(f"{n_t * n_s} atoms exceeds the 1e7 guard")
    t = prod.time.midpoints(tl)
    x = _space_grid(prod.space, sl)
    times = np.repeat(t, n_s)
    pts = np.tile(x, (n_t, 1))
    return DiscreteMeasure.uniform(times, pts, label="product", meta={"time_level": tl, "space_level": sl})


def space_base(prod):
    """Number of children per space cell, i.e. the product of per-axis copies."""
    return int(np.prod([s.m for s in prod.space]))


def default_time_level(prod):
    return 3 if prod.d == 1 else 2


def _trailing_digits(prod, time_level):
    M = space_base(prod)
    T = prod.time.count(time_level)
    k = 1
    while M ** k < T:
        k += 1
    return k


def diffuse_lift(prod, level, time_level=None):
    """Space cells at `level`, each lifted to a single time cell.

    The time cell of a space atom is read off the trailing IFS digits of its
    address, so atoms that are close in space sit at well separated times and
    all distinct times carry the same number of atoms. With a single-point F
    there is nothing to decorrelate and the product measure on time cells at
    `level` is returned instead.
    """
    if space_base(prod) == 1:
        return _product_measure(prod, level, 0)
    tl = default_time_level(prod) if time_level is None else time_level
    k = _trailing_digits(prod, tl)
    if level < k:
        raise LevelCapError(f"level {level} is below the {k} trailing digits used for time")
    for s in prod.space:
        s.check_level(level)
    counts = [s.count(level) for s in prod.space]
    n = int(np.prod(counts))
    if n > MAX_ATOMS:
        raise LevelCapError(f"{n} atoms exceeds the 1e7 guard")
    x = _space_grid(prod.space, level)
    idx = np.indices(counts).reshape(len(counts), -1)
    trail = np.zeros(n, dtype=np.int64)
    for s, j in zip(prod.space, idx):
        base = s.m ** k
        trail = trail * base + (j % base)
    T = prod.time.count(tl)
    times = prod.time.midpoints(tl)[trail % T]
    return DiscreteMeasure.uniform(times, x, label="lift",
                                   meta={"level": level, "time_level": tl, "trailing": k})


def _digit_reverse(j, base, depth):
    out = np.zeros_like(j)
    for _ in range(depth):
        out = out * base + j % base
        j = j // base
    return out


def lift_cell(prod, level, time_level=None, depth=2):
    """Sub-atoms of one level-`level` lift cell, `depth` levels further down.

    Space positions are the children of the leftmost cell; times are spread
    over the parent's time cell in digit-reversed order so that neighbouring
    children get distant times. All cells of a lift are translates of this
    arrangement, so its self-energy serves every atom.
    """
    if space_base(prod) == 1:
        tcell = prod.time.cell_length(level)
        sub = prod.time.midpoints(depth)
        t = prod.time.ambient[0] + (sub - prod.time.ambient[0]) * prod.time.ratio ** level
        x = np.tile(_space_grid(prod.space, 0)[:1], (t.size, 1))
        return DiscreteMeasure.uniform(t, x, label="cell", meta={"cell_time": tcell})
    tl = default_time_level(prod) if time_level is None else time_level
    M = space_base(prod)
    axes = []
    for s in prod.space:
        a = s.ambient[0]
        axes.append(a + (s.midpoints(depth) - a) * s.ratio ** level if not s.is_point
                    else np.array(s.points[:1]))
    c = np.arange(M ** depth)
    # split each base-M digit into per-axis digits (mixed radix)
    per_axis = [np.zeros_like(c) for _ in prod.space]
    for pos in range(depth):
        dig = (c // M ** (depth - 1 - pos)) % M
        rem = dig
        for i in reversed(range(len(prod.space))):
            m = prod.space[i].m
            per_axis[i] = per_axis[i] * m + rem % m
            rem = rem // m
    x = np.column_stack([ax[j] if ax.size > 1 else np.repeat(ax, c.size) for ax, j in zip(axes, per_axis)])
    tw = prod.time.cell_length(tl)
    t0 = prod.time.lefts(tl)[0]
    t = t0 + (_digit_reverse(c, M, depth) + 0.5) / M ** depth * tw
    return DiscreteMeasure.uniform(t, x, label="cell", meta={"depth": depth})


def frostman_sum(points, weights, beta):
    """Off-diagonal sum of w_i w_j |s_i - s_j|^{-beta}."""
    p = np.asarray(points, float)
    w = np.asarray(weights, float)
    diff = np.abs(p[:, None] - p[None, :])
    np.fill_diagonal(diff, 1.0)
    K = diff ** (-beta)
    np.fill_diagonal(K, 0.0)
    return float(w @ K @ w)
