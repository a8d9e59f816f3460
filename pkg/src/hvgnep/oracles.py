"""
Independent reference computations used to check the solver.

Nothing here calls the HSDM loop: cycles come from plain cyclic
projections, box distances from a closed form, and gradients from
central differences.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .sets import BoxSet, ConvexSet
from .spaces import BlockVector, PrimalDualPoint, SpaceSignature, StructuralError


class BudgetError(RuntimeError):
    """An iterative oracle ran out of iterations; carries the last displacement."""

    def __init__(self, message: str, last_displacement: float):
        self.last_displacement = last_displacement
        super().__init__(f"{message} (last displacement {last_displacement:.3e})")


def _common_dim(sets: Sequence[ConvexSet]) -> int:
    dims = {K.dim for K in sets}
    if len(dims) != 1:
        raise StructuralError("all sets must live in a common space")
    return dims.pop()


@dataclass(frozen=True)
class CycleTuple:
    """Points ``(x_1, ..., x_m)`` meant to satisfy ``x_i = P_{K_i}(x_{i-1})`` cyclically."""

    points: tuple

    def __post_init__(self):
        object.__setattr__(self, "points", tuple(np.asarray(p, dtype=float) for p in self.points))

    def as_block_vector(self) -> BlockVector:
        return BlockVector.from_blocks(self.points)

    def residual(self, sets: Sequence[ConvexSet]) -> float:
        return cycle_residual(sets, np.concatenate(self.points))

    def is_cycle(self, sets: Sequence[ConvexSet], tol: float) -> bool:
        return self.residual(sets) <= tol


def pocs_cycle(sets: Sequence[ConvexSet], start, max_iters: int = 1_000_000, tol: float = 1e-12) -> CycleTuple:
    """Cyclic projections ``x <- P_{K_m}(... P_{K_1}(x))`` until one sweep moves every point by less than `tol`."""
    sets = list(sets)
    if len(sets) < 2:
        raise ValueError("at least two sets are required")
    d = _common_dim(sets)
    x = np.asarray(start, dtype=float)
    if x.shape != (d,):
        raise StructuralError(f"start must have length {d}")
    prev = None
    disp = math.inf
    for _ in range(max_iters):
        pts = []
        for K in sets:
            x = K.project(x)
            pts.append(x)
        if prev is not None:
            disp = max(float(np.linalg.norm(a - b)) for a, b in zip(pts, prev))
            if disp < tol:
                return CycleTuple(tuple(pts))
        prev = pts
    raise BudgetError(f"cyclic projections did not settle within {max_iters} sweeps", disp)


def best_approximation_pair(K1: ConvexSet, K2: ConvexSet, tol: float = 1e-12, max_iters: int = 1_000_000,
                            start=None) -> tuple[np.ndarray, np.ndarray]:
    """Alternating projections for ``argmin ||x_1 - x_2||`` over ``K_1 x K_2``."""
    d = _common_dim([K1, K2])
    start = np.zeros(d) if start is None else start
    cyc = pocs_cycle([K1, K2], start, max_iters=max_iters, tol=tol)
    return cyc.points[0], cyc.points[1]


def box_distance(B1: BoxSet, B2: BoxSet) -> float:
    """Closed form ``sqrt(sum_k max(0, l2_k - u1_k, l1_k - u2_k)^2)``."""
    gap = np.maximum(0.0, np.maximum(B2.lower - B1.upper, B1.lower - B2.upper))
    return float(np.sqrt(gap @ gap))


def finite_difference_gradient(cost: Callable, x, i: int, step: float = 1e-5,
                               signature: SpaceSignature | None = None) -> np.ndarray:
    """Central differences of `cost` in the coordinates of block `i`.

    `cost` receives the same type as `x`: a `BlockVector`, or a flat array
    when `x` is an array (then `signature` gives the block layout).
    """
    if not step > 0:
        raise ValueError("step must be positive")
    if isinstance(x, BlockVector):
        sig, data, wrap = x.signature, x.data, (lambda a: BlockVector(x.signature, a))
    else:
        data = np.asarray(x, dtype=float)
        sig = signature or SpaceSignature((data.size,))
        wrap = lambda a: a  # noqa: E731
    sl = sig.block_slice(i)
    out = np.empty(sl.stop - sl.start)
    probe = data.copy()
    for k, j in enumerate(range(sl.start, sl.stop)):
        probe[j] = data[j] + step
        fp = float(cost(wrap(probe.copy())))
        probe[j] = data[j] - step
        fm = float(cost(wrap(probe.copy())))
        probe[j] = data[j]
        if not (math.isfinite(fp) and math.isfinite(fm)):
            raise ValueError(f"cost is not finite near coordinate {j}")
        out[k] = (fp - fm) / (2 * step)
    return out


def cycle_residual(sets: Sequence[ConvexSet], x, signature: SpaceSignature | None = None) -> float:
    """``sum_i ||x_i - P_{K_i}(x_{i-1})||`` with ``x_0 = x_m``."""
    sets = list(sets)
    d = _common_dim(sets)
    data = x.data if isinstance(x, BlockVector) else np.asarray(x, dtype=float)
    if data.shape != (len(sets) * d,):
        raise StructuralError(f"expected {len(sets)} blocks of length {d}")
    X = data.reshape(len(sets), d)
    prev = np.roll(X, 1, axis=0)
    return float(sum(np.linalg.norm(X[i] - K._project(prev[i])) for i, K in enumerate(sets)))


@dataclass(frozen=True)
class InclusionReport:
    """Outcome of a zero-inclusion check: ``||T_FB(xi) - xi||`` and its parts."""

    residual: float
    primal_residual: float
    dual_residual: float
    tol: float

    @property
    def passed(self) -> bool:
        return self.residual <= self.tol

    def __bool__(self):
        return self.passed


def zero_inclusion_check(ctx, xi, tol: float) -> InclusionReport:
    """Whether `xi` is (numerically) a zero of ``A + B``, i.e. a fixed point of ``T_FB``."""
    z = xi.flat if isinstance(xi, PrimalDualPoint) else np.asarray(xi, dtype=float)
    if z.shape != (ctx.signature.total_dim,):
        raise StructuralError("point does not match the game signature")
    diff = ctx.t_fb(z) - z
    n = ctx.signature.primal_dim
    return InclusionReport(float(np.linalg.norm(diff)), float(np.linalg.norm(diff[:n])),
                           float(np.linalg.norm(diff[n:])), float(tol))
