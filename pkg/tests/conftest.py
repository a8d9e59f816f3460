import numpy as np
import pytest

from hvgnep.experiments import gen_coupled_game, gen_cycles_instance
from hvgnep.games import LinearCoupling, LowerGame, coupled_game
from hvgnep.hsdm import SolverConfig, run_fbf
from hvgnep.sets import WholeSpaceSet
from hvgnep.spaces import SpaceSignature
from hvgnep.splitting import SplittingContext


def fbf_fixed_point(ctx: SplittingContext, z0=None, tol=1e-12, max_iters=1_000_000):
    cfg = SolverConfig(gamma=ctx.gamma, alpha=ctx.alpha, radius=ctx.radius, max_iters=max_iters,
                       residual_tolerance=tol, literal_line6=ctx.literal_line6,
                       enforce_step_range=ctx.enforce_step_range)
    tr = run_fbf(ctx.game, cfg, z0)
    assert tr.final_residual < tol
    return tr.final_point.flat


def free_game(m=2, d=1, grad=None, kappa=0.0):
    """Unconstrained game with zero coupling and a whole-space shared set."""
    sig = SpaceSignature.uniform(m, d, 1)
    n = sig.primal_dim
    return LowerGame(sig, grad or (lambda x: np.zeros(n)), kappa, [WholeSpaceSet(d)] * m,
                     LinearCoupling.zero(sig), WholeSpaceSet(1))


@pytest.fixture(scope="session")
def tiny_game():
    """m=2, M=1: G(x) = (2 x1 + x2 - 2, x1 + 2 x2 - 2) on [0,3]^2 with x1 + x2 <= 4."""
    return coupled_game([[1.0], [1.0]], [2.0], [[0], [0]], [[3], [3]], [4.0])


@pytest.fixture(scope="session")
def seeded_coupled():
    return gen_coupled_game(0)


@pytest.fixture(scope="session")
def cycles_instance():
    return gen_cycles_instance(0)


@pytest.fixture(scope="session")
def families(seeded_coupled, cycles_instance, tiny_game):
    """Every built-in family with an admissible step and a computed fixed point."""
    out = {}
    ctx = SplittingContext(seeded_coupled, "auto", 0.75, 1e15)
    out["coupled-game"] = (ctx, fbf_fixed_point(ctx))
    game, boxes = cycles_instance
    ctx = SplittingContext(game, 0.2, 0.5, 1e15)
    out["cycles"] = (ctx, fbf_fixed_point(ctx))
    ctx = SplittingContext(tiny_game, "auto", 0.5, 1e15)
    out["tiny"] = (ctx, fbf_fixed_point(ctx))
    return out


# acceptance summary: one line per criterion

_criteria_results = {}
_criteria_text = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(n): acceptance criterion number")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    marker = item.get_closest_marker("criterion")
    if marker is None:
        return
    if rep.when == "call" or (rep.when == "setup" and not rep.passed):
        n = marker.args[0]
        _criteria_text.setdefault(n, getattr(item.module, "CRITERIA", {}).get(n, ""))
        measured = dict(item.user_properties).get("measured", "")
        _criteria_results.setdefault(n, []).append((item.name, rep.passed, measured))


def pytest_terminal_summary(terminalreporter):
    if not _criteria_results:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(_criteria_results):
        parts = _criteria_results[n]
        status = "PASS" if all(ok for _, ok, _ in parts) else "FAIL"
        measured = "; ".join(f"{'' if ok else '[fail] '}{m or name}" for name, ok, m in parts)
        terminalreporter.write_line(f"criterion {n}: {status} | {_criteria_text[n]} | {measured}")
