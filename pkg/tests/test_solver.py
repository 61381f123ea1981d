import json
import sys
import textwrap

import pytest

import wfsolve.solver as solver
from wfsolve.bounds import compute_bounds
from wfsolve.core import Instance, evaluate, validate
from wfsolve.model import Settings, build_fixed_length_model, format_assignment, sequence_assignment
from wfsolve.oracle import brute_force_fixed_length
from wfsolve.solver import (
    IMPROVED,
    NO_IMPROVING,
    SKIPPED,
    TIMED_OUT,
    BackendConfigError,
    BackendExitError,
    BackendOutputError,
    CertificationError,
    RunReport,
    bundled_solver_cmd,
    external_backend_solve,
    native_branch_and_bound,
    run,
    solve_fixed_length,
)

from conftest import EXAMPLE, EXAMPLE_B

LEVELS = ("basic", "ineqs", "enhanced")


# -- fixed length ------------------------------------------------------------------------


@pytest.mark.parametrize("level", LEVELS)
def test_example_L8_improves_to_48(level):
    out = solve_fixed_length(EXAMPLE, 8, compute_bounds(EXAMPLE, 8, 50), Settings.preset(level))
    assert out.status == IMPROVED and out.objective == 48
    assert validate(EXAMPLE, out.sequence) == []
    assert evaluate(EXAMPLE, out.sequence).objective == 48


@pytest.mark.parametrize("level", LEVELS)
def test_example_L5_no_improvement(level):
    out = solve_fixed_length(EXAMPLE, 5, compute_bounds(EXAMPLE, 5, 50), Settings.preset(level))
    assert out.status == NO_IMPROVING


def test_zero_budget_times_out():
    out = solve_fixed_length(EXAMPLE, 8, compute_bounds(EXAMPLE, 8, 50), Settings.preset("basic"), budget=0)
    assert out.status == TIMED_OUT


def test_unknown_backend():
    with pytest.raises(BackendConfigError):
        solve_fixed_length(EXAMPLE, 8, compute_bounds(EXAMPLE, 8, 50), Settings.preset("basic"), backend="cplex")


@pytest.mark.parametrize("level", LEVELS)
def test_pruning_is_conservative(suite, level):
    cfg = Settings.preset(level)
    for name, inst in suite[::3]:
        for L in inst.lengths():
            for z in (None, brute_force_fixed_length(inst, L).objective + 1):
                b = compute_bounds(inst, L, z)
                fast = native_branch_and_bound(inst, L, b, cfg)
                slow = native_branch_and_bound(inst, L, b, cfg, prune=False)
                assert (fast.status, fast.objective) == (slow.status, slow.objective), (name, L, z)


def test_native_matches_oracle_per_length(suite, fixed_length_optima):
    cfg = Settings.preset("basic")
    for name, inst in suite:
        for L in inst.lengths():
            out = native_branch_and_bound(inst, L, compute_bounds(inst, L), cfg)
            assert out.objective == fixed_length_optima[name][L], (name, L)


# -- run -------------------------------------------------------------------------------


@pytest.mark.parametrize("level", LEVELS)
def test_example_run(level):
    report = run(EXAMPLE, Settings.preset(level))
    assert report.objective == 48
    assert report.proven_optimal and report.termination == "exhausted"
    assert report.initial_objective == 50
    assert evaluate(EXAMPLE, report.sequence).objective == 48


def test_example_enhanced_log():
    report = run(EXAMPLE, Settings.preset("enhanced"))
    by_length = {it.length: it for it in report.iterations}
    assert [it.length for it in report.iterations] == list(range(5, 11))
    assert by_length[8].status == IMPROVED and by_length[8].incumbent == 48
    assert by_length[10].skipped and by_length[10].bounds["K_star"] == 11


def test_single_symbol_run():
    report = run(Instance(1, 3, (1,), (1,)), Settings.preset("enhanced"))
    assert report.objective == 1 and report.proven_optimal


def test_zero_budget_run():
    report = run(EXAMPLE, Settings.preset("basic"), budget=0)
    assert report.termination == "time-limit" and not report.proven_optimal
    assert report.objective == 50


@pytest.mark.parametrize("level", LEVELS)
def test_incumbent_monotone(suite, level):
    for _, inst in suite[::2]:
        report = run(inst, Settings.preset(level))
        trail = [report.initial_objective] + [it.incumbent for it in report.iterations]
        assert all(a >= b for a, b in zip(trail, trail[1:]))
        assert report.objective == trail[-1]
        for it in report.iterations:
            if it.status == IMPROVED:
                assert it.objective == it.incumbent


def test_deterministic():
    a = run(EXAMPLE, Settings.preset("ineqs"))
    b = run(EXAMPLE, Settings.preset("ineqs"))
    assert a.trajectory() == b.trajectory()
    assert a.sequence == b.sequence


def test_levels_share_incumbent_trajectory(suite):
    for name, inst in suite:
        trails = {lvl: [it.incumbent for it in run(inst, Settings.preset(lvl)).iterations] for lvl in LEVELS}
        assert trails["basic"] == trails["ineqs"] == trails["enhanced"], name


@pytest.mark.parametrize("level", ["ineqs", "enhanced"])
def test_strengthened_refusals_are_safe(suite, fixed_length_optima, level):
    """Every length that a strengthened run skips or proves hopeless has no improving sequence."""
    for name, inst in suite:
        report = run(inst, Settings.preset(level))
        z = report.initial_objective
        for it in report.iterations:
            if it.status in (NO_IMPROVING, SKIPPED):
                assert fixed_length_optima[name][it.length] >= z, (name, it.length)
            z = it.incumbent


# -- reports -----------------------------------------------------------------------------


def test_report_json_roundtrip():
    report = run(EXAMPLE, Settings.preset("enhanced"))
    back = RunReport.from_dict(json.loads(json.dumps(report.to_dict())))
    assert back == report


# -- external backend -------------------------------------------------------------------


def _script(tmp_path, body):
    path = tmp_path / "fake_solver.py"
    path.write_text(textwrap.dedent(body))
    return f"{sys.executable} {path} {{lp}} {{sol}}"


def _model():
    return build_fixed_length_model(EXAMPLE, 8, compute_bounds(EXAMPLE, 8, 50), Settings.preset("basic"))


def _assignment_file(tmp_path, theta):
    values = sequence_assignment(_model(), EXAMPLE_B)
    values["theta"] = theta
    path = tmp_path / "answer.sol"
    path.write_text(format_assignment(values))
    return path


def test_missing_solver_writes_nothing(monkeypatch):
    def boom(*a, **k):
        raise AssertionError("a file was written")
    monkeypatch.setattr(solver.tempfile, "TemporaryDirectory", boom)
    with pytest.raises(BackendConfigError):
        external_backend_solve(_model(), "no-such-solver-xyz {lp} {sol}")


def test_empty_solver_command():
    with pytest.raises(BackendConfigError):
        external_backend_solve(_model(), "  ")


@pytest.mark.parametrize("theta, message", [(47, "objpred"), (49, "evaluates to 48")])
def test_certification_mismatch(tmp_path, theta, message):
    # 47 undercuts the objective rows; 49 satisfies them but misreports the value
    answer = _assignment_file(tmp_path, theta)
    cmd = _script(tmp_path, f"""
        import shutil, sys
        shutil.copy({str(answer)!r}, sys.argv[2])
        sys.exit(0)
    """)
    with pytest.raises(CertificationError, match=message):
        external_backend_solve(_model(), cmd, z_star=50)


def test_certified_answer(tmp_path):
    answer = _assignment_file(tmp_path, 48)
    cmd = _script(tmp_path, f"""
        import shutil, sys
        shutil.copy({str(answer)!r}, sys.argv[2])
    """)
    out = external_backend_solve(_model(), cmd, z_star=50)
    assert out.status == IMPROVED and out.objective == 48 and out.sequence == EXAMPLE_B


def test_violated_constraint(tmp_path):
    values = sequence_assignment(_model(), EXAMPLE_B)
    values["p_1_2_6"], values["p_1_2_2"] = 0, 1
    (tmp_path / "answer.sol").write_text(format_assignment(values))
    cmd = _script(tmp_path, f"""
        import shutil, sys
        shutil.copy({str(tmp_path / 'answer.sol')!r}, sys.argv[2])
    """)
    with pytest.raises(CertificationError, match="violates"):
        external_backend_solve(_model(), cmd, z_star=50)


def test_nonzero_exit(tmp_path):
    cmd = _script(tmp_path, "import sys; sys.exit(7)")
    with pytest.raises(BackendExitError):
        external_backend_solve(_model(), cmd)


def test_unparseable_output(tmp_path):
    cmd = _script(tmp_path, """
        import sys
        open(sys.argv[2], "w").write("this is not an assignment\\n")
    """)
    with pytest.raises(BackendOutputError):
        external_backend_solve(_model(), cmd)


def test_optimal_without_file(tmp_path):
    with pytest.raises(BackendOutputError):
        external_backend_solve(_model(), _script(tmp_path, "pass"))


def test_infeasible_exit(tmp_path):
    out = external_backend_solve(_model(), _script(tmp_path, "import sys; sys.exit(2)"), z_star=50)
    assert out.status == NO_IMPROVING


def test_time_limit_exit(tmp_path):
    out = external_backend_solve(_model(), _script(tmp_path, "import sys; sys.exit(3)"), z_star=50)
    assert out.status == TIMED_OUT and out.sequence is None


def test_paths_appended_without_placeholders(tmp_path):
    answer = _assignment_file(tmp_path, 48)
    path = tmp_path / "positional.py"
    path.write_text(f"import shutil, sys\nshutil.copy({str(answer)!r}, sys.argv[2])\n")
    out = external_backend_solve(_model(), f"{sys.executable} {path}", z_star=50)
    assert out.objective == 48


def test_bundled_highs_example_L8():
    out = external_backend_solve(_model(), bundled_solver_cmd(), budget=120, z_star=50)
    assert out.status == IMPROVED and out.objective == 48


def test_lp_export_requires_command():
    with pytest.raises(BackendConfigError):
        solve_fixed_length(EXAMPLE, 8, compute_bounds(EXAMPLE, 8, 50), Settings.preset("ineqs"), backend="lp-export")
