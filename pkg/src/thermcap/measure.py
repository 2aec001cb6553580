"""Weighted space-time atoms on the probability simplex."""
from dataclasses import dataclass, field

import numpy as np


@dataclass
class DiscreteMeasure:
    """Atoms (t_i, x_i) in (0, inf) x R^d with simplex weights.

    times has shape (n,), points shape (n, d), weights shape (n,).
    """
    times: np.ndarray
    points: np.ndarray
    weights: np.ndarray
    label: str = ""
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.times = np.asarray(self.times, dtype=float).reshape(-1)
        pts = np.asarray(self.points, dtype=float)
        if pts.ndim == 1:
            pts = pts.reshape(-1, 1)
        self.points = pts
        self.weights = np.asarray(self.weights, dtype=float).reshape(-1)
        n = self.times.size
        if self.points.shape[0] != n or self.weights.size != n:
            raise ValueError("times, points and weights must have matching lengths")
        if n and (np.any(self.weights < 0) or abs(self.weights.sum() - 1.0) > 1e-12 * max(1, n) ** 0.5 + 1e-12):
            raise ValueError("weights must be nonnegative and sum to 1")

    @property
    def n(self):
        return self.times.size

    @property
    def d(self):
        return self.points.shape[1]

    @property
    def diffuse_proxy(self):
        """True iff all atom times are distinct."""
        return np.unique(self.times).size == self.times.size

    @classmethod
    def uniform(cls, times, points, **kw):
        times = np.asarray(times, dtype=float).reshape(-1)
        return cls(times, points, np.full(times.size, 1.0 / times.size), **kw)

    def with_weights(self, w):
        return DiscreteMeasure(self.times, self.points, w, self.label, dict(self.meta))

    def merged(self):
        """Merge duplicate atoms, summing their weights."""
        key = np.column_stack([self.times, self.points])
        uniq, inv = np.unique(key, axis=0, return_inverse=True)
        w = np.bincount(inv.reshape(-1), weights=self.weights, minlength=len(uniq))
        return DiscreteMeasure(uniq[:, 0], uniq[:, 1:], w / w.sum(), self.label, dict(self.meta))
