import csv

import numpy as np
import pytest

from hvgnep.cli import main
from hvgnep.experiments import (ConfigError, ExperimentSpec, build_instance, build_selector, gen_coupled_game,
                                gen_cycles_instance, initial_point, jacobian_is_monotone, parse_config,
                                parse_config_text, run_experiment, sample_coupled_game)
from hvgnep.sets import BoxSet, boxes_intersection_empty


def small(family, **kw):
    return ExperimentSpec.defaults(family).with_(**kw)


# generators

def test_cycles_generator_is_seeded_and_valid():
    g1, b1 = gen_cycles_instance(3)
    g2, b2 = gen_cycles_instance(3)
    assert all(np.array_equal(a.lower, b.lower) and np.array_equal(a.upper, b.upper) for a, b in zip(b1, b2))
    assert len(b1) == 6 and g1.signature.block_dims == (3,) * 6
    for B in b1:
        assert np.all(B.lower <= B.upper) and np.all(B.lower >= 0) and np.all(B.upper <= 100)
    assert boxes_intersection_empty(b1)
    # interval oracle: the common intersection is a box, empty iff some side is inverted
    lo = np.max([B.lower for B in b1], axis=0)
    hi = np.min([B.upper for B in b1], axis=0)
    assert np.any(lo > hi)
    assert g1.kappa_G == 1.0 and g1.coupling.op_norm_bound == 0.0


def test_coupled_generator_ranges_and_feasibility():
    d = sample_coupled_game(5)
    assert np.all((0 <= d.p) & (d.p <= 10))
    assert np.all((-1 <= d.lower) & (d.lower <= 1)) and np.all(d.upper == 100)
    assert np.all((0 <= d.W) & (d.W <= 1)) and np.all(d.c == 120)
    game = d.game()
    x_low = d.lower.ravel()
    assert all(B.contains(x_low[game.signature.block_slice(i)]) for i, B in enumerate(game.strategy_sets))
    assert np.all(game.coupling.forward(x_low) <= d.c)
    assert game.coupling.op_norm_bound == pytest.approx(np.sqrt(6))
    g2 = gen_coupled_game(5)
    assert np.array_equal(game.jacobian, g2.jacobian) and np.array_equal(game.offset, g2.offset)


@pytest.mark.parametrize("seed", range(5))
def test_coupled_generator_monotone_probe(seed):
    game = gen_coupled_game(seed)
    assert jacobian_is_monotone(sample_coupled_game(seed).W)
    rng = np.random.default_rng(seed)
    for _ in range(100):
        x, y = rng.uniform(-1, 100, (2, 18))
        assert (game.pseudo_gradient(x) - game.pseudo_gradient(y)) @ (x - y) >= -1e-10


def test_monotone_rejection_can_be_disabled():
    assert sample_coupled_game(0, require_monotone=False).resamples == 0


def test_streams_are_independent():
    spec = small("coupled-game")
    inst = build_instance(spec)
    a = initial_point(spec, inst, 1)
    b = initial_point(spec.with_(selector="cycle"), build_instance(spec.with_(selector="cycle")), 1)
    assert np.array_equal(a, b)
    assert not np.array_equal(initial_point(spec, inst, 0), a)
    x = a[:18].reshape(6, 3)
    assert np.all(x >= inst.data.lower - 1e-12) and np.all(x <= 100)
    assert np.all((0 <= a[18:]) & (a[18:] <= 10))
    t = build_selector(spec, inst).offset
    assert np.all(-t.reshape(6, 3) >= inst.data.lower)


def test_spec_invariants():
    with pytest.raises(ValueError):
        small("coupled-game", c=5.0)
    with pytest.raises(ValueError):
        small("coupled-game", selector="bogus")
    with pytest.raises(ValueError):
        small("cycles", m=1)
    assert ExperimentSpec(family="cycles-implicit").family == "cycles"


# config

def test_empty_config_gives_reference_defaults(tmp_path):
    p = tmp_path / "empty.cfg"
    p.write_text("# nothing\n")
    spec = parse_config(p, "coupled-game")
    s = spec.solver
    assert (s.gamma, s.alpha, s.radius, s.max_iters) == (0.25, 0.75, 1e15, 1_000_000)
    assert s.lambda_schedule(7) == 1 / 7
    assert spec.init_count == 3
    spec = parse_config(p, "cycles")
    assert (spec.solver.gamma, spec.solver.alpha, spec.solver.max_iters, spec.init) == (0.2, 0.5, 100_000, "zero")


def test_config_values():
    spec = parse_config_text('family = coupled-game\ngamma = "auto"\nalpha = 0.5  # half\niters = 1e3\n'
                             'literal-line6 = true\nselector = cycle\nstep_check = strict\n')
    assert spec.solver.gamma == "auto" and spec.solver.alpha == 0.5 and spec.solver.max_iters == 1000
    assert spec.solver.literal_line6 and spec.selector == "cycle" and spec.solver.enforce_step_range
    ctx = spec.solver.context(build_instance(spec).game)
    assert ctx.gamma == pytest.approx(0.9 * ctx.game.step_bound)


@pytest.mark.parametrize("text,line", [
    ("alpha = 1.5\n", 1),
    ("\n\nbogus = 3\n", 3),
    ("iters = 2.5\n", 1),
    ("alpha 0.5\n", 1),
    ("gamma = 'unterminated\n", 1),
    ("literal_line6 = maybe\n", 1),
    ("seed = 1\nlambda = constant\n", 2),
])
def test_config_errors_carry_line_numbers(text, line):
    with pytest.raises(ConfigError) as info:
        parse_config_text(text, "coupled-game", path="x.cfg")
    assert info.value.line == line
    assert f"x.cfg:{line}:" in str(info.value)


def test_config_missing_file(tmp_path):
    with pytest.raises(ConfigError):
        parse_config(tmp_path / "absent.cfg", "cycles")


def test_config_family_conflict():
    with pytest.raises(ConfigError):
        parse_config_text("family = cycles\n", "coupled-game")


# orchestration

def read_csv(path):
    with open(path) as fh:
        return list(csv.reader(fh))


def test_run_experiment_writes_traces_and_summary(tmp_path):
    spec = small("coupled-game", max_iters=300, init_count=2, out=str(tmp_path / "cg"), gamma="auto",
                 step_check="strict")
    results = run_experiment(spec)
    assert [r.name for r in results] == ["fbf-init0", "fbf-init1", "hsdm-consensus-init0", "hsdm-consensus-init1"]
    for r in results:
        rows = read_csv(r.path)
        assert rows[0][:4] == ["iter", "fix_residual", "cycle_residual", "cost_1"]
        assert int(rows[-1][0]) == 300
    summary = dict(line.split(" = ", 1) for line in (tmp_path / "cg-summary.txt").read_text().splitlines())
    assert summary["gamma_admissible"] == "True"
    assert float(summary["gamma_margin"]) == pytest.approx(0.1)
    assert summary["run.fbf-init0.status"] == "ok"
    assert len(summary["run.hsdm-consensus-init1.final_costs"].split(",")) == 6


def test_zero_budget_rows(tmp_path):
    spec = small("cycles", max_iters=0, out=str(tmp_path / "c"))
    (r,) = run_experiment(spec)
    rows = read_csv(r.path)
    assert len(rows) == 2 and rows[1][0] == "0"


def test_end_to_end_determinism(tmp_path):
    outs = []
    for k in range(2):
        spec = small("cycles", max_iters=500, out=str(tmp_path / f"d{k}"))
        (r,) = run_experiment(spec)
        outs.append(r.path.read_bytes())
    assert outs[0] == outs[1]


def test_parallel_matches_serial(tmp_path):
    base = small("coupled-game", max_iters=200, init_count=2, algo="hsdm", gamma="auto", step_check="strict")
    a = run_experiment(base.with_(out=str(tmp_path / "s")))
    b = run_experiment(base.with_(out=str(tmp_path / "p"), workers=2))
    assert [x.path.read_bytes() for x in a] == [x.path.read_bytes() for x in b]


def test_divergence_is_recorded_per_run(tmp_path):
    spec = small("coupled-game", max_iters=3000, init_count=1, gamma=1e200, alpha=0.9, out=str(tmp_path / "bad"))
    results = run_experiment(spec)
    assert all(not r.ok and "diverged at iteration" in r.error for r in results)
    text = (tmp_path / "bad-summary.txt").read_text()
    assert "run.fbf-init0.status = diverged at iteration" in text


def test_output_path_errors_mention_path(tmp_path):
    blocker = tmp_path / "file"
    blocker.write_text("x")
    with pytest.raises(OSError, match="file"):
        run_experiment(small("cycles", max_iters=1, out=str(blocker / "sub" / "run")))


# command line

def test_cli_cycles(tmp_path, capsys):
    code = main(["cycles", "--iters", "200", "--seed", "2", "--out", str(tmp_path / "cy")])
    assert code == 0
    out = capsys.readouterr().out
    assert "hsdm-cycle-init0" in out
    assert (tmp_path / "cy-hsdm-cycle-init0.csv").exists()
    assert "seed = 2" in (tmp_path / "cy-summary.txt").read_text()


def test_cli_coupled_game_with_config(tmp_path, capsys):
    cfg = tmp_path / "g.cfg"
    cfg.write_text("gamma = auto\nstep_check = strict\n")
    code = main(["coupled-game", "--config", str(cfg), "--iters", "100", "--inits", "1", "--algo", "both",
                 "--selector", "cycle", "--literal-line6", "--out", str(tmp_path / "g")])
    assert code == 0
    summary = (tmp_path / "g-summary.txt").read_text()
    assert "literal_line6 = True" in summary and "selector = cycle" in summary
    assert (tmp_path / "g-fbf-init0.csv").exists() and (tmp_path / "g-hsdm-cycle-init0.csv").exists()


def test_cli_reports_config_errors(tmp_path, capsys):
    cfg = tmp_path / "bad.cfg"
    cfg.write_text("alpha = 2\n")
    assert main(["cycles", "--config", str(cfg), "--out", str(tmp_path / "z")]) == 2
    assert "bad.cfg:1:" in capsys.readouterr().err


def test_cli_rejects_unknown_choice():
    with pytest.raises(SystemExit):
        main(["coupled-game", "--algo", "newton"])
