"""
Forward-backward-forward operators on H x G.

With ``A(x, u) = (G(x) + L^* u, -L x)`` and ``B`` the product of the normal
cones of the ``C_i`` with the subdifferential of the support function of
``D``,

    T_FB   = (Id + gamma B)^{-1} (Id - gamma A)
    T_FBF  = (Id - gamma A) T_FB + gamma A
    T^a    = (1 - a) Id + a T_FBF

and the safeguarded operator is ``P_ball o T^a``. Every operator is
available both as a `SplittingContext` method on flat arrays (the
form used inside iteration loops) and as a module function that also
accepts `PrimalDualPoint` objects.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np

from .games import LowerGame, UpperSelector
from .sets import BallSet, product_projector
from .spaces import PrimalDualPoint, StructuralError

log = logging.getLogger(__name__)


class StepSizeError(ValueError):
    """Raised when ``gamma * (kappa_G + ||L||) >= 1`` and the range is enforced."""


@dataclass(frozen=True)
class SplittingContext:
    """Game data together with the FBF step, the averaging weight and the safeguard radius.

    Parameters
    ----------
    game : LowerGame
    gamma : float or "auto"
        FBF step. ``"auto"`` gives ``0.9 / (kappa_G + ||L||)``.
    alpha : float
        Averaging weight in (0, 1).
    radius : float
        Radius of the safeguard ball centred at the origin; ``inf`` disables it.
    literal_line6 : bool
        Compute the dual backward step as ``u - gamma P_D(u / gamma + L x)``
        instead of the resolvent at the forward point ``u + gamma L x``.
    enforce_step_range : bool
        Raise `StepSizeError` for steps outside ``(0, 1 / (kappa_G + ||L||))``;
        when False such steps only log a warning.
    """

    game: LowerGame
    gamma: float | str = "auto"
    alpha: float = 0.5
    radius: float = math.inf
    literal_line6: bool = False
    enforce_step_range: bool = True
    _cache: dict = field(default_factory=dict, init=False, repr=False, compare=False)

    def __post_init__(self):
        if self.gamma == "auto":
            object.__setattr__(self, "gamma", 0.9 * self.game.step_bound)
        gamma = float(self.gamma)
        object.__setattr__(self, "gamma", gamma)
        if not gamma > 0:
            raise StepSizeError(f"gamma must be positive, got {gamma}")
        if not 0 < self.alpha < 1:
            raise ValueError(f"alpha must lie in (0, 1), got {self.alpha}")
        if not self.radius > 0:
            raise ValueError("safeguard radius must be positive")
        if not self.step_admissible:
            msg = (f"gamma={gamma:g} violates gamma < 1/(kappa_G + ||L||) = {self.game.step_bound:.6g}")
            if self.enforce_step_range:
                raise StepSizeError(msg)
            log.warning("%s; convergence is not guaranteed", msg)
        self._build()

    @property
    def signature(self):
        return self.game.signature

    @property
    def kappa_A(self) -> float:
        return self.game.kappa_G + self.game.coupling.op_norm_bound

    @property
    def step_margin(self) -> float:
        """``1 - gamma * (kappa_G + ||L||)``; positive iff the step is admissible."""
        return 1.0 - self.gamma * self.kappa_A

    @property
    def step_admissible(self) -> bool:
        return self.step_margin > 0

    @property
    def safeguard(self) -> BallSet:
        return BallSet.centered(self.signature.total_dim, self.radius)

    def _build(self):
        game, c = self.game, self._cache
        n = self.signature.primal_dim
        q = self.signature.dual_dim
        c["n"] = n
        c["proj_C"] = product_projector(game.strategy_sets)
        c["proj_D"] = game.shared_set._project
        L = game.coupling
        if L.matrix is not None and not L.matrix.any():
            zeros = np.zeros(q)
            c["apply_A"] = lambda z: np.concatenate([game.pseudo_gradient(z[:n]), zeros])
        if game.jacobian is not None and L.matrix is not None:
            Lm = L.matrix
            M = np.block([[game.jacobian, Lm.T], [-Lm, np.zeros((q, q))]])
            b = np.concatenate([game.offset, np.zeros(q)])
            c["apply_A"] = lambda z: M @ z + b
            c["t_alpha"] = self._affine_t_alpha(M, b)

    def _affine_t_alpha(self, M, b):
        # With P = I - gamma M the averaged FBF step collapses to
        # w = P z - gamma b, y = res_B(w), t = z + alpha P (y - z).
        g, alpha, n = self.gamma, self.alpha, self._cache["n"]
        P = np.eye(M.shape[0]) - g * M
        aP = alpha * P
        q = -g * b
        proj_C, proj_D, literal = self._cache["proj_C"], self._cache["proj_D"], self.literal_line6

        def t_alpha(z):
            w = P @ z + q
            y = np.empty_like(w)
            y[:n] = proj_C(w[:n])
            v = w[n:]
            y[n:] = v - g * proj_D(v / g)
            if literal:
                y[n:] += z[n:] - v
            y -= z
            return z + aP @ y

        return t_alpha

    # flat-array operators

    def apply_A(self, z: np.ndarray) -> np.ndarray:
        c = self._cache
        if "apply_A" in c:
            return c["apply_A"](z)
        n = c["n"]
        x, u = z[:n], z[n:]
        L = self.game.coupling
        return np.concatenate([self.game.pseudo_gradient(x) + L.adjoint(u), -L.forward(x)])

    def resolvent_B(self, z: np.ndarray) -> np.ndarray:
        """``(Id + gamma B)^{-1}``; the dual part uses Moreau's identity ``v - gamma P_D(v / gamma)``."""
        n, g = self._cache["n"], self.gamma
        out = np.empty_like(z)
        out[:n] = self._cache["proj_C"](z[:n])
        v = z[n:]
        out[n:] = v - g * self._cache["proj_D"](v / g)
        return out

    def _fb(self, z: np.ndarray, a: np.ndarray) -> np.ndarray:
        y = self.resolvent_B(z - self.gamma * a)
        if self.literal_line6:
            n = self._cache["n"]
            y[n:] += self.gamma * a[n:]
        return y

    def t_fb(self, z: np.ndarray) -> np.ndarray:
        return self._fb(z, self.apply_A(z))

    def t_fbf(self, z: np.ndarray) -> np.ndarray:
        a = self.apply_A(z)
        y = self._fb(z, a)
        return y - self.gamma * (self.apply_A(y) - a)

    def t_alpha(self, z: np.ndarray) -> np.ndarray:
        fused = self._cache.get("t_alpha")
        if fused is not None:
            return fused(z)
        a = self.apply_A(z)
        y = self._fb(z, a)
        d = (y - z) - self.gamma * (self.apply_A(y) - a)
        return z + self.alpha * d

    def safeguarded_t(self, z: np.ndarray) -> np.ndarray:
        t = self.t_alpha(z)
        if self.radius < math.inf:
            nt = math.sqrt(t @ t)
            if nt > self.radius:
                t *= self.radius / nt
        return t

    def fix_residual(self, z: np.ndarray) -> float:
        r = self.safeguarded_t(z) - z
        return math.sqrt(r @ r)


def _apply(method, ctx: SplittingContext, xi):
    if isinstance(xi, PrimalDualPoint):
        if xi.signature != ctx.signature:
            raise StructuralError("point does not match the game signature")
        return PrimalDualPoint.from_flat(ctx.signature, method(xi.flat))
    z = np.asarray(xi, dtype=float)
    if z.shape != (ctx.signature.total_dim,):
        raise StructuralError(f"expected a vector of length {ctx.signature.total_dim}, got shape {z.shape}")
    return method(z)


def operator_A(ctx: SplittingContext, xi):
    return _apply(ctx.apply_A, ctx, xi)


def resolvent_B(ctx: SplittingContext, xi):
    return _apply(ctx.resolvent_B, ctx, xi)


def t_fb(ctx: SplittingContext, xi):
    return _apply(ctx.t_fb, ctx, xi)


def t_fbf(ctx: SplittingContext, xi):
    return _apply(ctx.t_fbf, ctx, xi)


def t_alpha(ctx: SplittingContext, xi):
    return _apply(ctx.t_alpha, ctx, xi)


def safeguarded_t(ctx: SplittingContext, xi):
    return _apply(ctx.safeguarded_t, ctx, xi)


def fix_residual(ctx: SplittingContext, xi) -> float:
    z = xi.flat if isinstance(xi, PrimalDualPoint) else np.asarray(xi, dtype=float)
    if z.shape != (ctx.signature.total_dim,):
        raise StructuralError("point does not match the game signature")
    return ctx.fix_residual(z)


def player_by_player_step(ctx: SplittingContext, selector: UpperSelector | None, xi: PrimalDualPoint,
                    lam: float, prototype: bool = False) -> PrimalDualPoint:
    """One outer iteration written player by player.

    This is the reference expansion of the safeguarded steepest-descent
    step; it evaluates every player's update separately and never forms
    the operators A or B. Used to cross-check the operator form.
    """
    game, g, a = ctx.game, ctx.gamma, ctx.alpha
    sig = ctx.signature
    m = sig.player_count
    L = game.coupling
    x, u = xi.x.data, xi.u

    Lstar_u = L.adjoint(u)
    grad_x = game.pseudo_gradient(x)
    # forward-backward step
    y = np.empty_like(x)
    for i in range(m):
        sl = sig.block_slice(i)
        y[sl] = game.strategy_sets[i].project(x[sl] - g * (grad_x[sl] + Lstar_u[sl]))
    Lx = L.forward(x)
    w = u - g * game.shared_set.project(u / g + Lx)
    if not ctx.literal_line6:
        w = w + g * Lx
    # forward step
    Lstar_w = L.adjoint(w)
    grad_y = game.pseudo_gradient(y)
    y_t = np.empty_like(x)
    for i in range(m):
        sl = sig.block_slice(i)
        y_t[sl] = y[sl] - g * ((grad_y[sl] + Lstar_w[sl]) - (grad_x[sl] + Lstar_u[sl]))
    w_t = w + g * (L.forward(y) - Lx)
    # averaging and projection
    x_half = (1 - a) * x + a * y_t
    u_next = (1 - a) * u + a * w_t
    if not prototype and ctx.radius < math.inf:
        nrm = math.sqrt(x_half @ x_half + u_next @ u_next)
        if nrm > ctx.radius:
            x_half = x_half * (ctx.radius / nrm)
            u_next = u_next * (ctx.radius / nrm)
    # steepest descent step
    x_next = x_half.copy()
    if selector is not None and lam != 0:
        half = PrimalDualPoint.from_flat(sig, np.concatenate([x_half, u_next])).x
        for i in range(m):
            x_next[sig.block_slice(i)] -= lam * selector.per_player_gradient(i, half)
    return PrimalDualPoint.from_flat(sig, np.concatenate([x_next, u_next]))
