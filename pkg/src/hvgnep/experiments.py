"""
Seeded instance generators, config parsing and run orchestration.

Random streams are split with `numpy.random.SeedSequence` keyed by
``(seed, stream, index)``, so the instance, the upper-level targets and
every initial point can be regenerated independently of one another.
"""

from __future__ import annotations

import logging
import math
import shlex
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, fields, replace
from pathlib import Path
from typing import Optional

import numpy as np

from .games import (LowerGame, UpperSelector, consensus_selector, coupled_game, coupled_game_jacobian,
                    cycle_selector, implicit_set_game, zero_selector)
from .hsdm import DivergenceError, IterationTrace, SolverConfig, run_fbf, run_hsdm
from .oracles import zero_inclusion_check
from .sets import BoxSet, boxes_intersection_empty

log = logging.getLogger(__name__)

FAMILIES = ("cycles", "coupled-game")
SELECTORS = ("consensus", "cycle", "none")
ALGOS = ("fbf", "hsdm", "both")

STREAM_INSTANCE, STREAM_TARGETS, STREAM_INIT = 0, 1, 2


class GeneratorError(RuntimeError):
    pass


class ConfigError(ValueError):
    def __init__(self, message: str, line: int | None = None, path=None):
        self.line = line
        where = f"{path}:{line}: " if line is not None else ""
        super().__init__(where + message)


def rng_for(seed: int, stream: int, index: int = 0) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence([int(seed), stream, index]))


# instance generators

def sample_boxes(rng, m: int, dim: int, low: float, high: float, max_resamples: int = 1000) -> list[BoxSet]:
    """`m` boxes with uniform corners in ``[low, high]^dim`` and empty common intersection."""
    for _ in range(max_resamples):
        a = rng.uniform(low, high, size=(m, dim))
        b = rng.uniform(low, high, size=(m, dim))
        boxes = [BoxSet(np.minimum(a[i], b[i]), np.maximum(a[i], b[i])) for i in range(m)]
        if boxes_intersection_empty(boxes):
            return boxes
    raise GeneratorError(f"no box family with empty intersection after {max_resamples} draws")


def gen_cycles_instance(seed: int, m: int = 6, dim: int = 3, low: float = 0.0, high: float = 100.0,
                        max_resamples: int = 1000) -> tuple[LowerGame, list[BoxSet]]:
    """Random boxes ``K_i`` and the game whose player i minimises ``0.5 d(x_i, K_i)^2``."""
    boxes = sample_boxes(rng_for(seed, STREAM_INSTANCE), m, dim, low, high, max_resamples)
    return implicit_set_game(boxes), boxes


@dataclass(frozen=True)
class CoupledGameData:
    W: np.ndarray
    p: np.ndarray
    lower: np.ndarray
    upper: np.ndarray
    c: np.ndarray
    resamples: int = 0

    def game(self) -> LowerGame:
        return coupled_game(self.W, self.p, self.lower, self.upper, self.c)


def jacobian_is_monotone(W, tol: float = 1e-12) -> bool:
    """Positive semidefiniteness of the symmetric part of the coupled-game Jacobian."""
    J = coupled_game_jacobian(W)
    return bool(np.linalg.eigvalsh(0.5 * (J + J.T)).min() >= -tol)


def sample_coupled_game(seed: int, m: int = 6, M: int = 3, c: float = 120.0, p_range=(0.0, 10.0),
                        b_low_range=(-1.0, 1.0), b_up: float = 100.0, w_range=(0.0, 1.0),
                        require_monotone: bool = True, max_resamples: int = 10_000) -> CoupledGameData:
    rng = rng_for(seed, STREAM_INSTANCE)
    p = rng.uniform(*p_range, size=M)
    lower = rng.uniform(*b_low_range, size=(m, M))
    upper = np.full((m, M), float(b_up))
    cvec = np.full(M, float(c))
    if np.any(lower > upper):
        raise GeneratorError("lower bounds exceed upper bounds")
    if not np.all(cvec > lower.sum(axis=0)):
        raise GeneratorError("shared bound c must exceed the sum of the lower bounds")
    for k in range(max_resamples):
        W = rng.uniform(*w_range, size=(m, M))
        if not require_monotone or jacobian_is_monotone(W):
            return CoupledGameData(W, p, lower, upper, cvec, k)
    raise GeneratorError(f"no monotone weight draw after {max_resamples} attempts")


def gen_coupled_game(seed: int, **kwargs) -> LowerGame:
    """Random linearly coupled game with box strategies and a shared aggregate bound."""
    return sample_coupled_game(seed, **kwargs).game()


# experiment description

@dataclass(frozen=True)
class ExperimentSpec:
    family: str = "coupled-game"
    selector: str = "consensus"
    algo: str = "both"
    m: int = 6
    dim: int = 3
    seed: int = 0
    solver: SolverConfig = field(default_factory=SolverConfig)
    init_count: int = 3
    init: str = "random"
    out: str = "run"
    workers: int = 1
    step_check: str = "strict"
    box_low: float = 0.0
    box_high: float = 100.0
    c: float = 120.0
    p_low: float = 0.0
    p_high: float = 10.0
    b_low_min: float = -1.0
    b_low_max: float = 1.0
    b_up: float = 100.0
    w_low: float = 0.0
    w_high: float = 1.0
    dual_init_high: float = 10.0
    require_monotone: bool = True

    def __post_init__(self):
        if self.family == "cycles-implicit":
            object.__setattr__(self, "family", "cycles")
        for name, allowed in (("family", FAMILIES), ("selector", SELECTORS), ("algo", ALGOS),
                              ("init", ("zero", "random")), ("step_check", ("strict", "warn"))):
            if getattr(self, name) not in allowed:
                raise ValueError(f"{name} must be one of {', '.join(allowed)}; got {getattr(self, name)!r}")
        if self.m < 1 or self.dim < 1:
            raise ValueError("m and dim must be positive")
        if self.init_count < 1:
            raise ValueError("init_count must be at least 1")
        if self.workers < 1:
            raise ValueError("workers must be at least 1")
        if self.family == "coupled-game" and not self.c > self.m * self.b_low_max:
            raise ValueError("coupled game needs c > m * b_low_max so that the shared constraint is feasible")
        if self.family == "cycles" and self.m < 2:
            raise ValueError("cycles need at least two sets")
        strict = self.step_check == "strict"
        if self.solver.enforce_step_range != strict or self.solver.seed != self.seed:
            object.__setattr__(self, "solver", replace(self.solver, enforce_step_range=strict, seed=self.seed))

    @classmethod
    def defaults(cls, family: str) -> "ExperimentSpec":
        """Settings of the reference experiments for each family."""
        if family in ("cycles", "cycles-implicit"):
            return cls(family="cycles", selector="cycle", algo="hsdm", init_count=1, init="zero",
                       solver=SolverConfig(gamma=0.2, alpha=0.5, radius=1e15, max_iters=100_000))
        if family == "coupled-game":
            return cls(family="coupled-game", selector="consensus", algo="both", init_count=3, init="random",
                       step_check="warn",
                       solver=SolverConfig(gamma=0.25, alpha=0.75, radius=1e15, max_iters=1_000_000,
                                           enforce_step_range=False))
        raise ValueError(f"unknown family {family!r}")

    def with_(self, **changes) -> "ExperimentSpec":
        solver_keys = {f.name for f in fields(SolverConfig)} - {"seed", "enforce_step_range"}
        solver_changes = {k: changes.pop(k) for k in list(changes) if k in solver_keys}
        spec = replace(self, **changes) if changes else self
        if solver_changes:
            spec = replace(spec, solver=replace(spec.solver, **solver_changes))
        return spec


@dataclass
class Instance:
    game: LowerGame
    target_sets: list
    cycle_sets: Optional[list] = None
    data: Optional[CoupledGameData] = None


def build_instance(spec: ExperimentSpec) -> Instance:
    if spec.family == "cycles":
        game, boxes = gen_cycles_instance(spec.seed, spec.m, spec.dim, spec.box_low, spec.box_high)
        return Instance(game, boxes, cycle_sets=boxes)
    data = sample_coupled_game(spec.seed, spec.m, spec.dim, spec.c, (spec.p_low, spec.p_high),
                               (spec.b_low_min, spec.b_low_max), spec.b_up, (spec.w_low, spec.w_high),
                               spec.require_monotone)
    game = data.game()
    return Instance(game, list(game.strategy_sets), data=data)


def sample_targets(spec: ExperimentSpec, target_sets) -> np.ndarray:
    rng = rng_for(spec.seed, STREAM_TARGETS)
    return np.array([rng.uniform(K.lower, K.upper) for K in target_sets])


def build_selector(spec: ExperimentSpec, instance: Instance, name: str | None = None) -> UpperSelector:
    name = name or spec.selector
    sig = instance.game.signature
    if name == "consensus":
        return consensus_selector(sig, sample_targets(spec, instance.target_sets))
    if name == "cycle":
        return cycle_selector(sig)
    return zero_selector(sig)


def initial_point(spec: ExperimentSpec, instance: Instance, index: int) -> np.ndarray:
    """Origin for ``init='zero'``; otherwise primal uniform in the target boxes and dual uniform in ``[0, dual_init_high]``."""
    sig = instance.game.signature
    if spec.init == "zero":
        return np.zeros(sig.total_dim)
    rng = rng_for(spec.seed, STREAM_INIT, index)
    x = np.concatenate([rng.uniform(K.lower, K.upper) for K in instance.target_sets])
    u = rng.uniform(0.0, spec.dual_init_high, size=sig.dual_dim)
    return np.concatenate([x, u])


# running

@dataclass
class RunResult:
    name: str
    algo: str
    init_index: int
    trace: Optional[IterationTrace] = None
    error: Optional[str] = None
    inclusion_residual: float = math.nan
    inclusion_passed: bool = False
    path: Optional[Path] = None
    elapsed: float = math.nan

    @property
    def ok(self) -> bool:
        return self.error is None


def planned_runs(spec: ExperimentSpec) -> list[tuple[str, int]]:
    algos = ["fbf", "hsdm"] if spec.algo == "both" else [spec.algo]
    return [(a, k) for a in algos for k in range(spec.init_count)]


def run_name(spec: ExperimentSpec, algo: str, index: int) -> str:
    tag = "fbf" if algo == "fbf" else f"hsdm-{spec.selector}"
    return f"{tag}-init{index}"


def execute_run(spec: ExperimentSpec, algo: str, index: int) -> RunResult:
    """Build the instance from the experiment description and perform one run; divergence is captured, not raised."""
    inst = build_instance(spec)
    selector = build_selector(spec, inst)
    xi0 = initial_point(spec, inst, index)
    result = RunResult(run_name(spec, algo, index), algo, index)
    start = time.perf_counter()
    try:
        if algo == "fbf":
            trace = run_fbf(inst.game, spec.solver, xi0, inst.cycle_sets, cost_selector=selector)
        else:
            trace = run_hsdm(inst.game, selector, spec.solver, xi0, inst.cycle_sets)
    except DivergenceError as exc:
        result.error = f"diverged at iteration {exc.iteration}"
        return result
    finally:
        result.elapsed = time.perf_counter() - start
    result.trace = trace
    rep = zero_inclusion_check(spec.solver.context(inst.game), trace.final_point,
                               max(10 * trace.final_residual, 1e-12))
    result.inclusion_residual, result.inclusion_passed = rep.residual, rep.passed
    return result


def _execute(args):
    return execute_run(*args)


def execute_runs(spec: ExperimentSpec, runs=None) -> list[RunResult]:
    runs = planned_runs(spec) if runs is None else runs
    jobs = [(spec, a, k) for a, k in runs]
    if spec.workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=min(spec.workers, len(jobs))) as pool:
            return list(pool.map(_execute, jobs))
    return [_execute(j) for j in jobs]


def _fmt(v) -> str:
    if isinstance(v, (list, tuple, np.ndarray)):
        return ",".join(_fmt(x) for x in v)
    if isinstance(v, float) or isinstance(v, np.floating):
        return f"{float(v):.17g}"
    return str(v)


def summary_items(spec: ExperimentSpec, results: list[RunResult]) -> list[tuple[str, object]]:
    inst = build_instance(spec)
    ctx = spec.solver.context(inst.game)
    items = [("family", spec.family), ("selector", spec.selector), ("seed", spec.seed), ("m", spec.m),
             ("dim", spec.dim), ("gamma", ctx.gamma), ("alpha", ctx.alpha), ("radius", ctx.radius),
             ("max_iters", spec.solver.max_iters), ("literal_line6", spec.solver.literal_line6),
             ("kappa_G", inst.game.kappa_G), ("L_norm_bound", inst.game.coupling.op_norm_bound),
             ("step_bound", inst.game.step_bound), ("gamma_margin", ctx.step_margin),
             ("gamma_admissible", ctx.step_admissible)]
    if inst.data is not None:
        items.append(("monotone_resamples", inst.data.resamples))
    for r in results:
        pre = f"run.{r.name}"
        if not r.ok:
            items.append((f"{pre}.status", r.error))
            continue
        t = r.trace
        items += [(f"{pre}.status", "ok"), (f"{pre}.iterations", t.iterations_run),
                  (f"{pre}.final_fix_residual", t.final_residual), (f"{pre}.final_costs", t.final_costs),
                  (f"{pre}.zero_inclusion_residual", r.inclusion_residual),
                  (f"{pre}.zero_inclusion_pass", r.inclusion_passed), (f"{pre}.max_norm", t.max_norm),
                  (f"{pre}.safeguard_activations", t.safeguard_activations)]
        if spec.family == "cycles":
            items.append((f"{pre}.final_cycle_residual", t.cycle_residuals[-1]))
    return items


def run_experiment(spec: ExperimentSpec) -> list[RunResult]:
    """Run every (algorithm, init) pair, write one CSV per run and a summary file.

    Files are ``<out>-<run>.csv`` and ``<out>-summary.txt``.
    """
    out = Path(spec.out)
    if out.parent and not out.parent.exists():
        try:
            out.parent.mkdir(parents=True, exist_ok=True)
        except OSError as exc:
            raise OSError(f"cannot create output directory {out.parent}: {exc}") from exc
    results = execute_runs(spec)
    for r in results:
        if r.ok:
            r.path = r.trace.to_csv(out.with_name(f"{out.name}-{r.name}.csv"))
    summary = out.with_name(f"{out.name}-summary.txt")
    try:
        summary.write_text("".join(f"{k} = {_fmt(v)}\n" for k, v in summary_items(spec, results)),
                           encoding="utf-8")
    except OSError as exc:
        raise OSError(f"cannot write summary to {summary}: {exc}") from exc
    return results


# config files

_SOLVER_KEYS = {"gamma": "gamma", "alpha": "alpha", "radius": "radius", "iters": "max_iters",
                "max_iters": "max_iters", "tolerance": "residual_tolerance", "record_every": "record_every",
                "literal_line6": "literal_line6", "prototype": "prototype"}
_SPEC_KEYS = {"family", "selector", "algo", "m", "dim", "seed", "inits", "init", "out", "workers",
              "step_check", "box_low", "box_high", "c", "p_low", "p_high", "b_low_min", "b_low_max", "b_up",
              "w_low", "w_high", "dual_init_high", "require_monotone", "lambda"}
_INT_KEYS = {"m", "dim", "seed", "inits", "workers", "iters", "max_iters", "record_every"}
_BOOL_KEYS = {"literal_line6", "prototype", "require_monotone"}
_STR_KEYS = {"family", "selector", "algo", "init", "out", "step_check", "lambda"}


def _convert(key: str, raw: str):
    if key in _STR_KEYS:
        return raw
    if key in _BOOL_KEYS:
        low = raw.lower()
        if low in ("true", "yes", "1", "on"):
            return True
        if low in ("false", "no", "0", "off"):
            return False
        raise ValueError(f"expected a boolean, got {raw!r}")
    if key == "gamma" and raw == "auto":
        return "auto"
    if key == "record_every" and raw in ("log", "none"):
        return None
    if key in _INT_KEYS:
        val = float(raw)
        if not val.is_integer():
            raise ValueError(f"expected an integer, got {raw!r}")
        return int(val)
    return float(raw)


def parse_config_text(text: str, family: str | None = None, path=None) -> ExperimentSpec:
    """Parse flat ``key = value`` lines; ``#`` starts a comment. See docs/config.md."""
    values, lines = {}, {}
    for no, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"expected 'key = value', got {line!r}", no, path)
        key, raw = (s.strip() for s in line.split("=", 1))
        key = key.replace("-", "_")
        if key not in _SPEC_KEYS and key not in _SOLVER_KEYS:
            raise ConfigError(f"unknown key {key!r}", no, path)
        try:
            parts = shlex.split(raw)
        except ValueError as exc:
            raise ConfigError(f"malformed value for {key!r}: {exc}", no, path) from None
        if len(parts) != 1:
            raise ConfigError(f"expected a single value for {key!r}", no, path)
        try:
            values[key] = _convert(key, parts[0])
        except ValueError as exc:
            raise ConfigError(f"bad value for {key!r}: {exc}", no, path) from None
        lines[key] = no

    fam = values.pop("family", None) or family
    if fam is None:
        raise ConfigError("no family given (set 'family' or choose a subcommand)", None, path)
    if family is not None and fam != family and {fam, family} != {"cycles", "cycles-implicit"}:
        raise ConfigError(f"config is for family {fam!r} but {family!r} was requested", lines.get("family"), path)
    if values.pop("lambda", "harmonic") != "harmonic":
        raise ConfigError("only the harmonic schedule 'lambda = harmonic' is supported", lines.get("lambda"), path)
    try:
        spec = ExperimentSpec.defaults(fam)
    except ValueError as exc:
        raise ConfigError(str(exc), lines.get("family"), path) from None
    changes = {}
    for key, val in values.items():
        changes[_SOLVER_KEYS.get(key, "init_count" if key == "inits" else key)] = val
    try:
        return spec.with_(**changes)
    except (ValueError, TypeError) as exc:
        bad = next((k for k in values if k in str(exc)), None)
        raise ConfigError(str(exc), lines.get(bad), path) from None


def parse_config(path, family: str | None = None) -> ExperimentSpec:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read config: {exc}", None, path) from None
    return parse_config_text(text, family, path)
