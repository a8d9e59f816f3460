"""
Closed convex sets with exact metric projections.
"""

from __future__ import annotations

import abc
from typing import Callable, Sequence

import numpy as np

from .spaces import StructuralError


class ConvexSet(abc.ABC):
    """Nonempty closed convex subset of R^dim exposed through its projection."""

    dim: int

    def _check(self, y) -> np.ndarray:
        y = np.atleast_1d(np.asarray(y, dtype=float))
        if y.shape != (self.dim,):
            raise StructuralError(f"{type(self).__name__} lives in R^{self.dim}, got shape {y.shape}")
        return y

    @abc.abstractmethod
    def _project(self, y: np.ndarray) -> np.ndarray:
        ...

    @property
    def bounded(self) -> bool:
        return False

    def project(self, y) -> np.ndarray:
        """Metric projection ``argmin_{z in set} ||y - z||``."""
        return self._project(self._check(y))

    def distance(self, y) -> float:
        y = self._check(y)
        return float(np.linalg.norm(y - self._project(y)))

    def half_squared_distance_gradient(self, y) -> np.ndarray:
        """Gradient of ``0.5 * d(., set)^2``, i.e. ``y - P(y)``."""
        y = self._check(y)
        return y - self._project(y)

    def contains(self, y, tol: float = 1e-12) -> bool:
        return self.distance(y) <= tol

    def __contains__(self, y):
        return self.contains(y)


class BoxSet(ConvexSet):
    """Axis-aligned box ``[lower, upper]``; degenerate sides are allowed."""

    def __init__(self, lower, upper):
        lower = np.atleast_1d(np.asarray(lower, dtype=float)).copy()
        upper = np.atleast_1d(np.asarray(upper, dtype=float)).copy()
        if lower.shape != upper.shape or lower.ndim != 1:
            raise StructuralError("box bounds must be vectors of equal length")
        if np.any(lower > upper):
            raise ValueError("box needs lower <= upper componentwise")
        lower.flags.writeable = False
        upper.flags.writeable = False
        self.lower, self.upper = lower, upper
        self.dim = lower.size

    @property
    def bounded(self):
        return bool(np.all(np.isfinite(self.lower)) and np.all(np.isfinite(self.upper)))

    def _project(self, y):
        return np.minimum(np.maximum(y, self.lower), self.upper)

    def __repr__(self):
        return f"BoxSet(lower={self.lower.tolist()}, upper={self.upper.tolist()})"


class BallSet(ConvexSet):
    """Closed Euclidean ball ``B(center; radius)``."""

    def __init__(self, center, radius: float):
        center = np.atleast_1d(np.asarray(center, dtype=float)).copy()
        if radius < 0:
            raise ValueError("radius must be nonnegative")
        center.flags.writeable = False
        self.center, self.radius = center, float(radius)
        self.dim = center.size

    @classmethod
    def centered(cls, dim: int, radius: float) -> "BallSet":
        return cls(np.zeros(dim), radius)

    @property
    def bounded(self):
        return np.isfinite(self.radius)

    def _project(self, y):
        d = y - self.center
        n = np.linalg.norm(d)
        if n <= self.radius:
            return y.copy()
        return self.center + (self.radius / n) * d

    def __repr__(self):
        return f"BallSet(center={self.center.tolist()}, radius={self.radius})"


class UpperBoundedSet(ConvexSet):
    """``{y : y_k <= c_k for every k}``."""

    def __init__(self, bound):
        bound = np.atleast_1d(np.asarray(bound, dtype=float)).copy()
        bound.flags.writeable = False
        self.bound = bound
        self.dim = bound.size

    def _project(self, y):
        return np.minimum(y, self.bound)

    def __repr__(self):
        return f"UpperBoundedSet(bound={self.bound.tolist()})"


class WholeSpaceSet(ConvexSet):
    """All of R^dim; the projection is the identity."""

    def __init__(self, dim: int):
        if dim < 1:
            raise StructuralError("dimension must be positive")
        self.dim = int(dim)

    def _project(self, y):
        return y.copy()

    def __repr__(self):
        return f"WholeSpaceSet({self.dim})"


def project(s: ConvexSet, y) -> np.ndarray:
    return s.project(y)


def distance(s: ConvexSet, y) -> float:
    return s.distance(y)


def half_squared_distance_gradient(s: ConvexSet, y) -> np.ndarray:
    return s.half_squared_distance_gradient(y)


def product_projector(sets: Sequence[ConvexSet]) -> Callable[[np.ndarray], np.ndarray]:
    """Projection onto ``C_1 x ... x C_m`` acting on concatenated vectors.

    Products of boxes and whole spaces collapse to a single clip.
    """
    sets = list(sets)
    dims = [s.dim for s in sets]
    offsets = np.concatenate([[0], np.cumsum(dims)]).astype(int)
    n = int(offsets[-1])

    if all(isinstance(s, WholeSpaceSet) for s in sets):
        return lambda y: y.copy()

    if all(isinstance(s, (BoxSet, WholeSpaceSet)) for s in sets):
        lo = np.concatenate([s.lower if isinstance(s, BoxSet) else np.full(s.dim, -np.inf) for s in sets])
        hi = np.concatenate([s.upper if isinstance(s, BoxSet) else np.full(s.dim, np.inf) for s in sets])
        return lambda y: np.minimum(np.maximum(y, lo), hi)

    def proj(y):
        out = np.empty(n)
        for s, a, b in zip(sets, offsets[:-1], offsets[1:]):
            out[a:b] = s._project(y[a:b])
        return out

    return proj


def boxes_intersection_empty(boxes: Sequence[BoxSet]) -> bool:
    """Interval test: the intersection of boxes is a box, empty iff some side is inverted."""
    lo = np.max([b.lower for b in boxes], axis=0)
    hi = np.min([b.upper for b in boxes], axis=0)
    return bool(np.any(lo > hi))
