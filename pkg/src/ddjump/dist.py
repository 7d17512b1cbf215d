"""Sparse probability mass functions on the integer lattice."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


def canonical_order(support):
    """Lexicographic order on rows (first coordinate major)."""
    keys = tuple(support[:, i] for i in range(support.shape[1] - 1, -1, -1))
    return np.lexsort(keys)


@dataclass(frozen=True)
class LatticeDistribution:
    """Probability mass on distinct lattice points, canonically sorted."""

    support: np.ndarray  # (n, d) int64
    mass: np.ndarray  # (n,) float, nonnegative, sums to 1

    def __post_init__(self):
        support = np.asarray(self.support, dtype=np.int64)
        mass = np.asarray(self.mass, dtype=float)
        if support.ndim != 2 or len(support) != len(mass):
            raise ValueError("support and mass must be parallel")
        if np.any(mass < 0):
            raise ValueError("negative mass")
        if abs(mass.sum() - 1.0) > 1e-12:
            raise ValueError(f"mass sums to {mass.sum()!r}, not 1")
        object.__setattr__(self, "support", support)
        object.__setattr__(self, "mass", mass)

    @staticmethod
    def from_points(points, weights=None, normalize=True):
        """Aggregate possibly repeated lattice points into a pmf."""
        points = np.asarray(points, dtype=np.int64)
        uniq, inverse = np.unique(points, axis=0, return_inverse=True)
        if weights is None:
            m = np.bincount(inverse, minlength=len(uniq)).astype(float)
        else:
            m = np.bincount(inverse, weights=np.asarray(weights, dtype=float), minlength=len(uniq))
        if normalize:
            m = m / m.sum()
        order = canonical_order(uniq)
        return LatticeDistribution(uniq[order], m[order])

    @staticmethod
    def point_mass(x):
        x = np.asarray(x, dtype=np.int64).reshape(1, -1)
        return LatticeDistribution(x, np.array([1.0]))

    def as_dict(self):
        return {tuple(int(v) for v in s): float(p) for s, p in zip(self.support, self.mass)}

    def __len__(self):
        return len(self.mass)
