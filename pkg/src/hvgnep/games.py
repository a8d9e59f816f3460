"""
Problem data for the lower-level game and the upper-level selector.

All operators act on flat float arrays laid out according to a
`SpaceSignature`; the public helpers named after individual gradients
also accept and return `BlockVector` objects.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional, Sequence

import numpy as np

from .sets import BoxSet, ConvexSet, UpperBoundedSet, WholeSpaceSet, product_projector
from .spaces import BlockVector, PrimalDualPoint, SpaceSignature, StructuralError

FlatMap = Callable[[np.ndarray], np.ndarray]


@dataclass(frozen=True)
class LinearCoupling:
    """Linear map ``L : H -> G`` with its adjoint and a bound on ``||L||``."""

    forward: FlatMap
    adjoint: FlatMap
    op_norm_bound: float
    matrix: Optional[np.ndarray] = None

    @classmethod
    def from_matrix(cls, matrix, op_norm_bound: float | None = None) -> "LinearCoupling":
        matrix = np.array(matrix, dtype=float)
        if op_norm_bound is None:
            op_norm_bound = float(np.linalg.norm(matrix, 2))
        mt = matrix.T.copy()
        return cls(lambda x: matrix @ x, lambda u: mt @ u, op_norm_bound, matrix)

    @classmethod
    def sum_of_blocks(cls, signature: SpaceSignature) -> "LinearCoupling":
        """``x -> sum_i x_i`` into ``G = H_1``; its adjoint replicates ``u``, so ``||L|| = sqrt(m)``."""
        if not signature.is_uniform or signature.dual_dim != signature.block_dims[0]:
            raise StructuralError("sum coupling needs equal blocks and dual_dim equal to the block size")
        m, d = signature.player_count, signature.block_dims[0]
        return cls.from_matrix(np.tile(np.eye(d), m), op_norm_bound=float(np.sqrt(m)))

    @classmethod
    def zero(cls, signature: SpaceSignature) -> "LinearCoupling":
        return cls.from_matrix(np.zeros((signature.dual_dim, signature.primal_dim)), op_norm_bound=0.0)


@dataclass(frozen=True)
class LowerGame:
    """Data of the lower-level game and its variational inequality.

    `pseudo_gradient` maps a flat primal vector to the stacked partial
    gradients ``(grad_1 f_1(x), ..., grad_m f_m(x))``. When the pseudo-gradient
    is affine, ``jacobian`` and ``offset`` may be given so that
    ``G(x) = jacobian @ x + offset``; the splitting operators then use a
    single dense matrix product.
    """

    signature: SpaceSignature
    pseudo_gradient: FlatMap
    kappa_G: float
    strategy_sets: tuple[ConvexSet, ...]
    coupling: LinearCoupling
    shared_set: ConvexSet
    jacobian: Optional[np.ndarray] = None
    offset: Optional[np.ndarray] = None
    name: str = "game"

    def __post_init__(self):
        sig = self.signature
        object.__setattr__(self, "strategy_sets", tuple(self.strategy_sets))
        if len(self.strategy_sets) != sig.player_count:
            raise StructuralError("one strategy set per player is required")
        for s, d in zip(self.strategy_sets, sig.block_dims):
            if s.dim != d:
                raise StructuralError(f"strategy set of dimension {s.dim} for a block of dimension {d}")
        if self.shared_set.dim != sig.dual_dim:
            raise StructuralError("shared set must live in the dual space")
        if self.kappa_G < 0:
            raise ValueError("Lipschitz constant must be nonnegative")

    @property
    def step_bound(self) -> float:
        """Supremum of admissible FBF steps, ``1 / (kappa_G + ||L||)``."""
        return 1.0 / (self.kappa_G + self.coupling.op_norm_bound)

    def G(self, x: BlockVector) -> BlockVector:
        return BlockVector(self.signature, self.pseudo_gradient(x.data))


@dataclass(frozen=True)
class UpperSelector:
    """Upper-level selection data: the stacked gradients of the players' upper costs.

    Affine gradients may also be given as ``matrix @ x + offset``; `is_zero`
    marks the trivial selector so loops can skip the gradient step.
    """

    signature: SpaceSignature
    gradient: FlatMap
    kappa_upper: float
    costs: Optional[Callable[[np.ndarray], np.ndarray]] = None
    name: str = "selector"
    matrix: Optional[np.ndarray] = None
    offset: Optional[np.ndarray] = None
    is_zero: bool = False

    def per_player_gradient(self, i: int, x: BlockVector) -> np.ndarray:
        return self.gradient(x.data)[self.signature.block_slice(i)]

    def __call__(self, x: BlockVector) -> BlockVector:
        return BlockVector(self.signature, self.gradient(x.data))


# pseudo-gradients of the built-in games

def _as_diagonals(W, m: int, M: int) -> np.ndarray:
    W = np.asarray(W, dtype=float)
    if W.shape == (m, M, M):
        W = np.array([np.diag(w) for w in W])
    if W.shape != (m, M):
        raise StructuralError(f"expected {m} diagonal weights of length {M}")
    return W


def coupled_game_pseudo_gradient(W, p, x: BlockVector) -> BlockVector:
    """Pseudo-gradient of ``f_i(x) = (sum_k W_k x_k - p)^T x_i``.

    Block i is ``W_i x_i + sum_k W_k x_k - p``. `W` holds the diagonals of
    the nonnegative diagonal matrices (shape ``(m, M)``) or the matrices
    themselves (shape ``(m, M, M)``).
    """
    sig = x.signature
    m = sig.player_count
    if not sig.is_uniform:
        raise StructuralError("coupled game needs equal block sizes")
    M = sig.block_dims[0]
    W = _as_diagonals(W, m, M)
    p = np.asarray(p, dtype=float)
    if p.shape != (M,):
        raise StructuralError(f"p must have length {M}")
    X = x.data.reshape(m, M)
    load = (W * X).sum(axis=0) - p
    return BlockVector(sig, (W * X + load).ravel())


def coupled_game_jacobian(W) -> np.ndarray:
    """Constant Jacobian of the coupled-game pseudo-gradient (``W_i delta_ik + W_k`` blocks)."""
    W = np.asarray(W, dtype=float)
    m, M = W.shape
    J = np.zeros((m * M, m * M))
    for i in range(m):
        for k in range(m):
            J[i * M:(i + 1) * M, k * M:(k + 1) * M] = np.diag(W[k])
        J[i * M:(i + 1) * M, i * M:(i + 1) * M] += np.diag(W[i])
    return J


def consensus_upper_gradient(targets, i: int, x: BlockVector) -> np.ndarray:
    """Player i's gradient of ``0.5 (||x_i - t_i||^2 + sum_{j != i} ||x_i - x_j||^2)``."""
    sig = x.signature
    targets = np.asarray(targets, dtype=float)
    if not sig.is_uniform or targets.shape != (sig.player_count, sig.block_dims[0]):
        raise StructuralError("targets must be one vector per player, matching the block size")
    X = x.data.reshape(sig.player_count, -1)
    i %= sig.player_count
    return (X[i] - targets[i]) + sig.player_count * X[i] - X.sum(axis=0)


def cycle_upper_gradient(x: BlockVector) -> BlockVector:
    """``x_i - x_{i-1}`` per block with ``x_0 = x_m``; equals ``(Id - R) x``."""
    if not x.signature.is_uniform:
        raise StructuralError("cycle gradient needs a common strategy space")
    d = x.signature.block_dims[0]
    return BlockVector(x.signature, x.data - np.roll(x.data, d))


def implicit_set_pseudo_gradient(sets: Sequence[ConvexSet], x: BlockVector) -> BlockVector:
    """Stacked ``x_i - P_{K_i}(x_i)``: the gradients of ``0.5 d(., K_i)^2``."""
    if len(sets) != x.signature.player_count:
        raise StructuralError("one set per player is required")
    return BlockVector(x.signature, np.concatenate(
        [K.half_squared_distance_gradient(b) for K, b in zip(sets, x.blocks)]))


def lift_upper_selector(selector: UpperSelector, xi: PrimalDualPoint) -> PrimalDualPoint:
    """``(x, u) -> (G_up(x), 0)``."""
    if xi.signature != selector.signature:
        raise StructuralError("point and selector have different signatures")
    return PrimalDualPoint(selector(xi.x), np.zeros(xi.signature.dual_dim))


def estimate_lipschitz(op: FlatMap, dim: int, trials: int = 200, seed=0, scale: float = 1.0,
                       safety: float = 1.1) -> float:
    """Sampled Lipschitz estimate ``safety * max ||op(x) - op(y)|| / ||x - y||``.

    Pairs are drawn from ``N(0, scale^2 I)``; coincident pairs are skipped.
    """
    if trials < 1:
        raise ValueError("trials must be at least 1")
    rng = np.random.default_rng(seed)
    best, seen = 0.0, 0
    for _ in range(trials):
        x = scale * rng.standard_normal(dim)
        y = scale * rng.standard_normal(dim)
        d = np.linalg.norm(x - y)
        if d == 0:
            continue
        seen += 1
        best = max(best, np.linalg.norm(op(x) - op(y)) / d)
    if seen == 0:
        raise ValueError("every sampled pair was degenerate")
    return safety * best


# built-in games and selectors

def coupled_game(W, p, lower, upper, c) -> LowerGame:
    """Linearly coupled game with box strategy sets and a shared upper bound on ``sum_i x_i``.

    Parameters
    ----------
    W : array_like, shape (m, M)
        Diagonals of the nonnegative weight matrices.
    p : array_like, shape (M,)
    lower, upper : array_like, shape (m, M)
        Box bounds of every player's strategy set.
    c : array_like, shape (M,)
        Componentwise bound on the aggregate ``sum_i x_i``.
    """
    W = np.array(W, dtype=float)
    m, M = W.shape
    if np.any(W < 0):
        raise ValueError("weights must be nonnegative")
    p = np.array(p, dtype=float)
    lower = np.asarray(lower, dtype=float).reshape(m, M)
    upper = np.asarray(upper, dtype=float).reshape(m, M)
    sig = SpaceSignature.uniform(m, M, dual_dim=M)
    J = coupled_game_jacobian(W)
    offset = -np.tile(p, m)
    return LowerGame(
        signature=sig,
        pseudo_gradient=lambda x: J @ x + offset,
        kappa_G=float(np.linalg.norm(J, 2)),
        strategy_sets=tuple(BoxSet(lower[i], upper[i]) for i in range(m)),
        coupling=LinearCoupling.sum_of_blocks(sig),
        shared_set=UpperBoundedSet(c),
        jacobian=J,
        offset=offset,
        name="coupled-game",
    )


def implicit_set_game(sets: Sequence[ConvexSet]) -> LowerGame:
    """Unconstrained game whose player i minimises ``0.5 d(x_i, K_i)^2``.

    Its v-GNE set is ``K_1 x ... x K_m``. The dual space is a one-dimensional
    placeholder with zero coupling and an unconstrained shared set.
    """
    sets = tuple(sets)
    dims = tuple(K.dim for K in sets)
    sig = SpaceSignature(dims, dual_dim=1)
    proj = product_projector(sets)
    return LowerGame(
        signature=sig,
        pseudo_gradient=lambda x: x - proj(x),
        kappa_G=1.0,
        strategy_sets=tuple(WholeSpaceSet(d) for d in dims),
        coupling=LinearCoupling.zero(sig),
        shared_set=WholeSpaceSet(1),
        name="implicit-sets",
    )


def consensus_costs(targets, x) -> np.ndarray:
    targets = np.asarray(targets, dtype=float)
    X = np.asarray(x, dtype=float).reshape(targets.shape)
    diff = X[:, None, :] - X[None, :, :]
    return 0.5 * (np.sum((X - targets) ** 2, axis=1) + np.sum(diff ** 2, axis=(1, 2)))


def cycle_costs(x, m: int) -> np.ndarray:
    X = np.asarray(x, dtype=float).reshape(m, -1)
    return 0.5 * np.sum((X - np.roll(X, 1, axis=0)) ** 2, axis=1)


def consensus_selector(signature: SpaceSignature, targets) -> UpperSelector:
    """Each player tracks its target while staying close to every other player.

    The gradient Jacobian is ``(m + 1) I - 1 1^T (x) I`` with norm ``m + 1``.
    """
    m = signature.player_count
    targets = np.array(targets, dtype=float)
    if not signature.is_uniform or targets.shape != (m, signature.block_dims[0]):
        raise StructuralError("targets must be one vector per player, matching the block size")
    d = signature.block_dims[0]
    S = np.kron((m + 1) * np.eye(m) - np.ones((m, m)), np.eye(d))
    t = -targets.ravel()
    return UpperSelector(signature, lambda x: S @ x + t, float(m + 1), lambda x: consensus_costs(targets, x),
                         "consensus", S, t)


def cycle_selector(signature: SpaceSignature) -> UpperSelector:
    """Player i wants to be close to player i-1 (cyclically); gradient ``Id - R``."""
    if not signature.is_uniform:
        raise StructuralError("cycle selector needs a common strategy space")
    m, d = signature.player_count, signature.block_dims[0]
    S = np.eye(m * d) - np.roll(np.eye(m * d), d, axis=0)
    return UpperSelector(signature, lambda x: S @ x, 2.0, lambda x: cycle_costs(x, m), "cycle", S,
                         np.zeros(m * d))


def zero_selector(signature: SpaceSignature) -> UpperSelector:
    n = signature.primal_dim
    return UpperSelector(signature, lambda x: np.zeros(n), 0.0,
                         lambda x: np.zeros(signature.player_count), "none", np.zeros((n, n)), np.zeros(n), True)
