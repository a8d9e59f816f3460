"""
Outer iterations: the safeguarded hybrid steepest descent method and the FBF baseline.

Each step computes ``eta = P_ball(T^a(xi_n))`` and then moves the primal
part along the upper-level gradient, ``xi_{n+1} = eta - lam_{n+1} (G_up(eta_x), 0)``.
The FBF baseline is the same loop with a zero selector.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Callable, Optional, Sequence

import numpy as np

from .games import LowerGame, UpperSelector, zero_selector
from .oracles import cycle_residual
from .sets import ConvexSet
from .spaces import BlockVector, PrimalDualPoint, StructuralError
from .splitting import SplittingContext


class DivergenceError(ArithmeticError):
    """A non-finite value appeared in the iterates."""

    def __init__(self, iteration: int, message: str | None = None):
        self.iteration = iteration
        super().__init__(message or f"non-finite iterate at iteration {iteration}")


def lambda_harmonic(n: int) -> float:
    """``lambda_n = 1/n``: vanishing and non-summable."""
    if n < 1:
        raise ValueError(f"step index must be at least 1, got {n}")
    return 1.0 / n


@dataclass(frozen=True)
class SolverConfig:
    """Run parameters shared by `run_hsdm` and `run_fbf`.

    ``record_every=None`` records at log-spaced iterations
    (every ``10**floor(log10 n)``-th). ``prototype=True`` drops the safeguard
    ball, giving the unsafeguarded steepest-descent iteration.
    """

    gamma: float | str = "auto"
    alpha: float = 0.5
    radius: float = 1e15
    lambda_schedule: Callable[[int], float] = lambda_harmonic
    max_iters: int = 100_000
    residual_tolerance: float = 0.0
    record_every: Optional[int] = None
    literal_line6: bool = False
    enforce_step_range: bool = True
    prototype: bool = False
    seed: Optional[int] = None

    def __post_init__(self):
        if not 0 < self.alpha < 1:
            raise ValueError(f"alpha must lie in (0, 1), got {self.alpha}")
        if not self.radius > 0:
            raise ValueError("safeguard radius must be positive")
        if self.max_iters < 0:
            raise ValueError("max_iters must be nonnegative")
        if self.residual_tolerance < 0:
            raise ValueError("residual tolerance must be nonnegative")
        if self.record_every is not None and self.record_every < 1:
            raise ValueError("record_every must be a positive count")
        if self.gamma != "auto" and not float(self.gamma) > 0:
            raise ValueError("gamma must be positive or 'auto'")

    def context(self, game: LowerGame) -> SplittingContext:
        return SplittingContext(game, self.gamma, self.alpha,
                                math.inf if self.prototype else self.radius,
                                self.literal_line6, self.enforce_step_range)

    def should_record(self, n: int) -> bool:
        if self.record_every is not None:
            return n % self.record_every == 0
        if n < 10:
            return True
        return n % 10 ** int(math.log10(n)) == 0

    def with_(self, **changes) -> "SolverConfig":
        return replace(self, **changes)


@dataclass
class IterationTrace:
    """Recorded history of one run.

    Rows are aligned: ``iterations[k]`` is the index n of the iterate whose
    fixed-point residual, upper costs, cycle residual and coordinates are
    stored in row k. The last row is always the final iterate.
    """

    signature: object
    iterations: list = field(default_factory=list)
    fix_residuals: list = field(default_factory=list)
    upper_costs: list = field(default_factory=list)
    cycle_residuals: list = field(default_factory=list)
    iterates: list = field(default_factory=list)
    final_point: Optional[PrimalDualPoint] = None
    max_norm: float = 0.0
    safeguard_activations: int = 0
    stopped_early: bool = False
    step_margin: float = math.nan

    @property
    def final_residual(self) -> float:
        return self.fix_residuals[-1]

    @property
    def final_costs(self) -> np.ndarray:
        return np.asarray(self.upper_costs[-1])

    @property
    def iterations_run(self) -> int:
        return self.iterations[-1]

    def as_arrays(self) -> dict:
        return {
            "iter": np.asarray(self.iterations, dtype=int),
            "fix_residual": np.asarray(self.fix_residuals),
            "cycle_residual": np.asarray(self.cycle_residuals),
            "costs": np.asarray(self.upper_costs),
            "x": np.asarray(self.iterates),
        }

    def to_csv(self, path) -> Path:
        path = Path(path)
        m = self.signature.player_count
        n = self.signature.primal_dim
        header = (["iter", "fix_residual", "cycle_residual"] + [f"cost_{i + 1}" for i in range(m)]
                  + [f"x_{k}" for k in range(n)])
        fmt = "{:.17g}".format
        try:
            with path.open("w", newline="", encoding="utf-8") as fh:
                w = csv.writer(fh)
                w.writerow(header)
                for it, res, cyc, cost, x in zip(self.iterations, self.fix_residuals, self.cycle_residuals,
                                                 self.upper_costs, self.iterates):
                    w.writerow([it, fmt(res), fmt(cyc)] + [fmt(c) for c in cost] + [fmt(v) for v in x[:n]])
        except OSError as exc:
            raise OSError(f"cannot write trace to {path}: {exc}") from exc
        return path


def _next_recorded(config: SolverConfig, n: int) -> int:
    """Smallest recorded index at or after `n`."""
    if config.record_every is not None:
        k = config.record_every
        return -(-n // k) * k
    if n < 10:
        return n
    step = 10 ** int(math.log10(n))
    return -(-n // step) * step


def hsdm_step(ctx: SplittingContext, selector: UpperSelector, xi, lam: float):
    """``eta - lam * (G_up(eta_x), 0)`` with ``eta`` the safeguarded FBF step of `xi`."""
    if lam < 0:
        raise ValueError("lambda must be nonnegative")
    flat = isinstance(xi, np.ndarray)
    z = np.asarray(xi, dtype=float) if flat else xi.flat
    if z.shape != (ctx.signature.total_dim,):
        raise StructuralError("point does not match the game signature")
    n = ctx.signature.primal_dim
    eta = ctx.safeguarded_t(z)
    eta[:n] -= lam * selector.gradient(eta[:n])
    return eta if flat else PrimalDualPoint.from_flat(ctx.signature, eta)


def evaluate_upper_costs(selector: UpperSelector, x) -> np.ndarray:
    """``(f_1(x), ..., f_m(x))`` for a selector that carries its cost functions."""
    data = x.data if isinstance(x, BlockVector) else np.asarray(x, dtype=float)
    if isinstance(x, BlockVector) and x.signature != selector.signature:
        raise StructuralError("point and selector have different signatures")
    if data.shape != (selector.signature.primal_dim,):
        raise StructuralError("point does not match the selector signature")
    if selector.costs is None:
        raise ValueError(f"selector {selector.name!r} has no cost functions")
    return np.asarray(selector.costs(data), dtype=float)


def run_hsdm(game: LowerGame, selector: UpperSelector, config: SolverConfig, xi0=None,
             cycle_sets: Sequence[ConvexSet] | None = None, cost_selector: UpperSelector | None = None,
             ) -> IterationTrace:
    """Iterate the safeguarded HSDM from `xi0` (default: the origin).

    Stops after ``config.max_iters`` steps, or earlier once both
    ``||S(xi_n) - xi_n||`` and ``lam_n * kappa_up * ||x_n||`` drop below a
    positive ``residual_tolerance``. `cycle_sets` adds the cycle residual
    to every recorded row; `cost_selector` chooses which upper costs are
    recorded (default: those of `selector`).
    """
    sig = game.signature
    if selector.signature != sig:
        raise StructuralError("selector and game have different signatures")
    ctx = config.context(game)
    n_p = sig.primal_dim
    if xi0 is None:
        z = np.zeros(sig.total_dim)
    elif isinstance(xi0, PrimalDualPoint):
        if xi0.signature != sig:
            raise StructuralError("initial point does not match the game signature")
        z = xi0.flat
    else:
        z = np.array(xi0, dtype=float)
        if z.shape != (sig.total_dim,):
            raise StructuralError("initial point does not match the game signature")
    if not np.all(np.isfinite(z)):
        raise DivergenceError(0, "initial point is not finite")

    costs_of = cost_selector if cost_selector is not None else selector
    has_costs = costs_of.costs is not None
    cycle_sets = list(cycle_sets) if cycle_sets is not None else None
    trace = IterationTrace(sig, step_margin=ctx.step_margin)
    kappa_up = selector.kappa_upper
    radius = ctx.radius
    t_alpha = ctx.t_alpha
    if selector.is_zero:
        grad = None
    elif selector.matrix is not None:
        S, s0 = selector.matrix, selector.offset
        grad = lambda x: S @ x + s0  # noqa: E731
    else:
        grad = selector.gradient

    def record(n, z, res):
        x = z[:n_p]
        trace.iterations.append(n)
        trace.fix_residuals.append(res)
        trace.upper_costs.append(costs_of.costs(x) if has_costs else np.zeros(sig.player_count))
        trace.cycle_residuals.append(cycle_residual(cycle_sets, x, sig) if cycle_sets else math.nan)
        trace.iterates.append(z.copy())

    with np.errstate(over="ignore", invalid="ignore"):
        _iterate(trace, z, config, t_alpha, grad, record, n_p, radius, kappa_up)
    return trace


def _iterate(trace, z, config, t_alpha, grad, record, n_p, radius, kappa_up):
    # non-finite values are detected explicitly and raised as DivergenceError
    sqrt = math.sqrt
    schedule = config.lambda_schedule
    tol = config.residual_tolerance
    max_norm = sqrt(z @ z)
    activations = 0
    n, last = 0, config.max_iters
    next_record = 0
    while True:
        eta = t_alpha(z)
        ne = sqrt(eta @ eta)
        if ne > radius:
            eta *= radius / ne
            activations += 1
        r = eta - z
        res = sqrt(r @ r)
        if not math.isfinite(res):
            raise DivergenceError(n)
        if n == last:
            record(n, z, res)
            break
        if tol > 0 and res < tol and n >= 1:
            x = z[:n_p]
            if schedule(n) * kappa_up * sqrt(x @ x) < tol:
                record(n, z, res)
                trace.stopped_early = True
                break
        if n == next_record:
            record(n, z, res)
            next_record = _next_recorded(config, n + 1)
        n += 1
        if grad is not None:
            eta[:n_p] -= schedule(n) * grad(eta[:n_p])
        z = eta
        nz = sqrt(z @ z)
        if nz > max_norm:
            if not math.isfinite(nz):
                raise DivergenceError(n)
            max_norm = nz

    trace.final_point = PrimalDualPoint.from_flat(trace.signature, z)
    trace.max_norm = float(max_norm)
    trace.safeguard_activations = activations


def run_fbf(game: LowerGame, config: SolverConfig, xi0=None, cycle_sets=None,
            cost_selector: UpperSelector | None = None) -> IterationTrace:
    """The safeguarded FBF iteration; literally `run_hsdm` with a zero selector."""
    return run_hsdm(game, zero_selector(game.signature), config, xi0, cycle_sets, cost_selector)
