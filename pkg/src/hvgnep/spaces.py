"""
Product Hilbert spaces.

A joint strategy lives in H = H_1 x ... x H_m, each H_i = R^{d_i}, and the
primal-dual iterates of the splitting operators live in H x G with G = R^q.
Vectors are stored as one contiguous float64 array; a `SpaceSignature`
tells how that array is cut into player blocks.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property
from typing import Sequence

import numpy as np


class StructuralError(ValueError):
    """Raised when shapes, block layouts or signatures do not agree."""


def _frozen(a) -> np.ndarray:
    a = np.array(a, dtype=float).ravel()
    a.flags.writeable = False
    return a


@dataclass(frozen=True)
class SpaceSignature:
    """Block layout of H = H_1 x ... x H_m together with the dual dimension.

    Parameters
    ----------
    block_dims : sequence of int
        Dimension ``d_i`` of every player's strategy space.
    dual_dim : int, optional
        Dimension of the dual space G.
    """

    block_dims: tuple[int, ...]
    dual_dim: int = 1

    def __post_init__(self):
        dims = tuple(int(d) for d in self.block_dims)
        object.__setattr__(self, "block_dims", dims)
        if len(dims) < 1:
            raise StructuralError("at least one player is required")
        if any(d < 1 for d in dims):
            raise StructuralError(f"block dimensions must be positive, got {dims}")
        if int(self.dual_dim) < 1:
            raise StructuralError("dual dimension must be positive")
        object.__setattr__(self, "dual_dim", int(self.dual_dim))

    @classmethod
    def uniform(cls, player_count: int, block_dim: int, dual_dim: int = 1) -> "SpaceSignature":
        return cls((block_dim,) * player_count, dual_dim)

    @property
    def player_count(self) -> int:
        return len(self.block_dims)

    @property
    def primal_dim(self) -> int:
        return sum(self.block_dims)

    @property
    def total_dim(self) -> int:
        return self.primal_dim + self.dual_dim

    @property
    def is_uniform(self) -> bool:
        return len(set(self.block_dims)) == 1

    @cached_property
    def offsets(self) -> tuple[int, ...]:
        return tuple(int(o) for o in np.concatenate([[0], np.cumsum(self.block_dims)]))

    def block_slice(self, i: int) -> slice:
        if not -self.player_count <= i < self.player_count:
            raise StructuralError(f"player index {i} out of range for m={self.player_count}")
        i %= self.player_count
        return slice(self.offsets[i], self.offsets[i + 1])

    def split(self, flat: np.ndarray) -> list[np.ndarray]:
        """Views of `flat` (length ``primal_dim``) per player."""
        return [flat[self.offsets[i]:self.offsets[i + 1]] for i in range(self.player_count)]

    def check_primal(self, flat) -> np.ndarray:
        flat = np.asarray(flat, dtype=float)
        if flat.shape != (self.primal_dim,):
            raise StructuralError(f"expected primal vector of length {self.primal_dim}, got shape {flat.shape}")
        return flat

    def check_dual(self, u) -> np.ndarray:
        u = np.asarray(u, dtype=float)
        if u.shape != (self.dual_dim,):
            raise StructuralError(f"expected dual vector of length {self.dual_dim}, got shape {u.shape}")
        return u


class BlockVector:
    """An immutable element ``x = (x_1, ..., x_m)`` of the product space."""

    __slots__ = ("signature", "data")

    def __init__(self, signature: SpaceSignature, data):
        data = np.asarray(data, dtype=float)
        signature.check_primal(data)
        self.signature = signature
        self.data = _frozen(data)

    @classmethod
    def from_blocks(cls, blocks: Sequence, dual_dim: int = 1, signature: SpaceSignature | None = None) -> "BlockVector":
        blocks = [np.atleast_1d(np.asarray(b, dtype=float)) for b in blocks]
        if any(b.ndim != 1 for b in blocks):
            raise StructuralError("blocks must be one-dimensional")
        if signature is None:
            signature = SpaceSignature(tuple(len(b) for b in blocks), dual_dim)
        elif tuple(len(b) for b in blocks) != signature.block_dims:
            raise StructuralError("block lengths do not match the signature")
        return cls(signature, np.concatenate(blocks) if blocks else np.zeros(0))

    @classmethod
    def zeros(cls, signature: SpaceSignature) -> "BlockVector":
        return cls(signature, np.zeros(signature.primal_dim))

    @property
    def blocks(self) -> list[np.ndarray]:
        return self.signature.split(self.data)

    def block(self, i: int) -> np.ndarray:
        return self.data[self.signature.block_slice(i)]

    def __len__(self):
        return self.signature.player_count

    def _other(self, other: "BlockVector") -> np.ndarray:
        if not isinstance(other, BlockVector):
            return NotImplemented
        if other.signature != self.signature:
            raise StructuralError("block vectors have different signatures")
        return other.data

    def __add__(self, other):
        return BlockVector(self.signature, self.data + self._other(other))

    def __sub__(self, other):
        return BlockVector(self.signature, self.data - self._other(other))

    def __mul__(self, a):
        return BlockVector(self.signature, float(a) * self.data)

    __rmul__ = __mul__

    def __neg__(self):
        return BlockVector(self.signature, -self.data)

    def __eq__(self, other):
        if not isinstance(other, BlockVector):
            return NotImplemented
        return self.signature == other.signature and np.array_equal(self.data, other.data)

    __hash__ = None

    def norm(self) -> float:
        return float(np.linalg.norm(self.data))

    def __repr__(self):
        inner = ", ".join(np.array2string(b, precision=6) for b in self.blocks)
        return f"BlockVector({inner})"


class PrimalDualPoint:
    """An immutable point ``xi = (x, u)`` of H x G with the product norm."""

    __slots__ = ("x", "u")

    def __init__(self, x: BlockVector, u=None):
        if u is None:
            u = np.zeros(x.signature.dual_dim)
        self.x = x
        self.u = _frozen(x.signature.check_dual(np.asarray(u, dtype=float).ravel()))

    @property
    def signature(self) -> SpaceSignature:
        return self.x.signature

    @property
    def flat(self) -> np.ndarray:
        """Concatenation ``[x, u]`` as a fresh writable array."""
        return np.concatenate([self.x.data, self.u])

    @classmethod
    def from_flat(cls, signature: SpaceSignature, z) -> "PrimalDualPoint":
        z = np.asarray(z, dtype=float)
        if z.shape != (signature.total_dim,):
            raise StructuralError(f"expected a vector of length {signature.total_dim}, got shape {z.shape}")
        n = signature.primal_dim
        return cls(BlockVector(signature, z[:n]), z[n:])

    @classmethod
    def zeros(cls, signature: SpaceSignature) -> "PrimalDualPoint":
        return cls(BlockVector.zeros(signature))

    def _check(self, other):
        if not isinstance(other, PrimalDualPoint):
            return NotImplemented
        if other.signature != self.signature:
            raise StructuralError("primal-dual points have different signatures")
        return other

    def __add__(self, other):
        other = self._check(other)
        return PrimalDualPoint(self.x + other.x, self.u + other.u)

    def __sub__(self, other):
        other = self._check(other)
        return PrimalDualPoint(self.x - other.x, self.u - other.u)

    def __mul__(self, a):
        return PrimalDualPoint(self.x * a, float(a) * self.u)

    __rmul__ = __mul__

    def __neg__(self):
        return self * -1.0

    def __eq__(self, other):
        if not isinstance(other, PrimalDualPoint):
            return NotImplemented
        return self.x == other.x and np.array_equal(self.u, other.u)

    __hash__ = None

    def norm(self) -> float:
        return float(np.sqrt(self.x.data @ self.x.data + self.u @ self.u))

    def __repr__(self):
        return f"PrimalDualPoint(x={self.x!r}, u={np.array2string(self.u, precision=6)})"


def axpy(a: float, v, w):
    """Return ``a * v + w`` for block vectors or primal-dual points."""
    if type(v) is not type(w):
        raise StructuralError("axpy operands must have the same type")
    return v * a + w


def inner(v, w) -> float:
    """Product-space inner product, including the dual term for primal-dual points."""
    if isinstance(v, PrimalDualPoint) and isinstance(w, PrimalDualPoint):
        w = v._check(w)
        return float(v.x.data @ w.x.data + v.u @ w.u)
    if isinstance(v, BlockVector) and isinstance(w, BlockVector):
        return float(v.data @ v._other(w))
    raise StructuralError("inner product needs two block vectors or two primal-dual points")


def norm(v) -> float:
    return v.norm()


def substitute(xi, y: BlockVector, i: int) -> BlockVector:
    """The point ``(x_i; y_{-i})``: `y` with block `i` replaced by `xi`."""
    sl = y.signature.block_slice(i)
    xi = np.atleast_1d(np.asarray(xi, dtype=float))
    if xi.shape != (sl.stop - sl.start,):
        raise StructuralError(f"block {i} has length {sl.stop - sl.start}, got shape {xi.shape}")
    data = y.data.copy()
    data[sl] = xi
    return BlockVector(y.signature, data)


def circular_shift_right(v: BlockVector) -> BlockVector:
    """``(x_1, ..., x_m) -> (x_m, x_1, ..., x_{m-1})``; needs equal block sizes."""
    sig = v.signature
    if not sig.is_uniform:
        raise StructuralError("circular shift needs all blocks in a common space")
    d = sig.block_dims[0]
    return BlockVector(sig, np.roll(v.data, d))
