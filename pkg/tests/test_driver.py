from dataclasses import replace
from pathlib import Path

import numpy as np
import pytest

from cgks.config import load_case, parse_case
from cgks.driver import (accuracy_study, analytic_error, bench_case, bench_reconstruction, build_mesh,
                         convergence_orders, error_norms, initial_state, run_case, sod_profile, solver_options,
                         surface_forces)
from cgks.errors import ConfigError, SolverError
from cgks.evolution import Solver, SolverOptions, SolverState
from cgks.exact import project, sine_wave, sine_wave_gradient, uniform
from cgks.mesh_tools import PatchKind
from cgks.results import NormRecord, RunRecord, init_db

CASES = Path(__file__).parent.parent / "cases"
WALLS = {name: PatchKind.SLIP_WALL for name in ("xmin", "xmax", "ymin", "ymax", "zmin", "zmax")}


def small_case(tmp_path, **changes):
    config = parse_case("""
[case]
name = small
end_time = 0.02

[mesh]
cells = 4

[output]
log_every = 0
""")
    return replace(config, output_dir=str(tmp_path), **changes)


def test_build_mesh_applies_patch_kinds():
    config = parse_case("[mesh]\ncells = 3\nperiodic = yz\n[boundary]\nxmin = slip_wall\nxmax = farfield_riemann\n")
    mesh = build_mesh(config)
    kinds = {p.name: p.kind for p in mesh.patches}
    assert kinds["xmin"] == PatchKind.SLIP_WALL
    assert kinds["xmax"] == PatchKind.FARFIELD


def test_build_mesh_rejects_unknown_patch():
    config = parse_case("[boundary]\nwall = slip_wall\n")
    with pytest.raises(ConfigError) as err:
        build_mesh(config)
    assert err.value.key == "wall"


def test_error_norms(periodic_hex):
    W, _ = project(periodic_hex, sine_wave, sine_wave_gradient)
    zero = error_norms(periodic_hex, W, W)
    assert np.all(zero.l1 == 0.0) and np.all(zero.linf == 0.0)
    shifted = W.copy()
    shifted[:, 0] += 1e-3
    report = error_norms(periodic_hex, shifted, W)
    assert report.l1[0] == pytest.approx(1e-3, rel=1e-9)
    assert report.l2[0] == pytest.approx(1e-3, rel=1e-9)
    assert report.linf[0] == pytest.approx(1e-3, rel=1e-9)
    assert report.cells == 64
    assert report.h == pytest.approx(0.5)


def test_analytic_error_of_the_projection(periodic_tet):
    W, G = project(periodic_tet, sine_wave, sine_wave_gradient)
    report = analytic_error(periodic_tet, SolverState.initial(W, G))
    np.testing.assert_allclose(report.l1, 0.0, atol=1e-15)
    with pytest.raises(ValueError):
        analytic_error(periodic_tet, SolverState.initial(W, G), "vortex")


def test_convergence_orders():
    orders = convergence_orders([np.array([2.147907e-2]), np.array([3.064556e-3])])
    assert orders[0][0] == pytest.approx(2.81, abs=0.01)
    assert convergence_orders([np.array([1.0]), np.array([0.125]), np.array([1 / 64])])[1][0] == pytest.approx(3.0)


def test_initial_states(tmp_path):
    config = small_case(tmp_path, initial="sod", periodic=("y", "z"),
                        boundary={"xmin": PatchKind.SLIP_WALL, "xmax": PatchKind.SLIP_WALL})
    mesh = build_mesh(config)
    state = initial_state(config, mesh)
    left = mesh.cell_centroid[:, 0] < 1.0
    np.testing.assert_allclose(state.W[left, 0], 1.0)
    np.testing.assert_allclose(state.W[~left, 0], 0.125)
    np.testing.assert_array_equal(state.G, 0.0)

    config = small_case(tmp_path, initial="uniform")
    state = initial_state(config, build_mesh(config))
    np.testing.assert_allclose(state.W[:, 0], 1.0)


def test_run_case_writes_and_records(tmp_path):
    url = f"sqlite:///{tmp_path / 'runs.db'}"
    config = small_case(tmp_path, record=True)
    result = run_case(config, db_url=url)
    assert result.state.t == pytest.approx(0.02)
    assert result.report is not None
    assert result.report.l1[0] < 1e-2
    assert result.report.reals_per_cell == pytest.approx(60.0)
    assert set(result.report.timings) == {"reconstruction", "flux", "update"}
    assert result.outputs == [tmp_path / "small.vtk"]
    assert result.outputs[0].exists()

    session = init_db(url)()
    try:
        runs = session.query(RunRecord).all()
        assert len(runs) == 1
        assert runs[0].name == "small"
        assert runs[0].steps == result.state.step
        norms = session.query(NormRecord).all()
        assert len(norms) == 1
        assert norms[0].l1 == pytest.approx(float(result.report.l1[0]))
    finally:
        session.close()


def test_run_case_snapshots(tmp_path):
    config = small_case(tmp_path, vtk_every=1, max_steps=2)
    result = run_case(config)
    names = sorted(p.name for p in result.outputs)
    assert names == ["small.vtk", "small_000001.vtk", "small_000002.vtk"]


def test_run_case_propagates_solver_failures(tmp_path, monkeypatch):
    monkeypatch.setattr(Solver, "compute_dt", lambda self, state: 5.0)
    with pytest.raises(SolverError) as err:
        run_case(small_case(tmp_path, end_time=100.0))
    assert err.value.step == 0


def test_accuracy_study_table_and_record(tmp_path):
    url = f"sqlite:///{tmp_path / 'runs.db'}"
    config = small_case(tmp_path, record=True)
    reports = accuracy_study(config, levels=2, start_cells=3, db_url=url)
    assert [r.cells for r in reports] == [27, 216]
    assert reports[0].orders is None
    assert set(reports[1].orders) == {"l1", "l2", "linf"}
    assert reports[1].l1[0] < reports[0].l1[0]

    lines = (tmp_path / "small_accuracy.csv").read_text().splitlines()
    assert lines[0] == "cells,l1,l2,linf,order_l1,order_l2,order_linf"
    assert len(lines) == 3
    assert lines[1].endswith(",,,")

    session = init_db(url)()
    try:
        run = session.query(RunRecord).one()
        assert run.kind == "accuracy"
        assert [n.cells for n in sorted(run.norms, key=lambda n: n.level)] == [27, 216]
    finally:
        session.close()


def test_bench_case_writes_and_records(tmp_path):
    url = f"sqlite:///{tmp_path / 'runs.db'}"
    reports = bench_case(small_case(tmp_path, record=True), repetitions=1, steps=1, db_url=url)
    assert set(reports) == {"two_step", "original"}
    lines = (tmp_path / "small_bench.csv").read_text().splitlines()
    assert lines[0] == "path,reals_per_cell,matrices,reconstruction_time,step_time"
    assert len(lines) == 3

    session = init_db(url)()
    try:
        run = session.query(RunRecord).one()
        assert run.kind == "bench"
        assert sorted(b.path for b in run.benches) == ["original", "two_step"]
    finally:
        session.close()


def test_bench_reconstruction_ledger(periodic_hex):
    W, G = project(periodic_hex, sine_wave, sine_wave_gradient)
    reports = bench_reconstruction(periodic_hex, SolverState.initial(W, G), repetitions=1, steps=1)
    assert reports["two_step"].reals_per_cell == pytest.approx(60.0)
    assert reports["two_step"].matrices == 0
    assert reports["original"].reals_per_cell == pytest.approx(348.0)
    assert reports["original"].matrices == 1
    assert all(r.step_time > 0.0 for r in reports.values())


def test_surface_pressure_force(open_hex):
    mesh = open_hex.with_patch_kinds(WALLS)
    solver = Solver(mesh, SolverOptions())
    W = uniform(mesh.cell_centroid, 1.0, (0.0, 0.0, 0.0), 1.0)
    forces = surface_forces(solver, SolverState.initial(W), "xmin", q_ref=0.5, area_ref=4.0)
    np.testing.assert_allclose(forces.pressure, [-4.0, 0.0, 0.0], atol=1e-12)
    np.testing.assert_allclose(forces.viscous, 0.0, atol=1e-14)
    assert forces.cd == pytest.approx(-2.0)
    assert forces.cl == pytest.approx(0.0, abs=1e-12)


def test_solver_options_follow_the_case():
    config = load_case(CASES / "cylinder.ini")
    options = solver_options(config)
    assert options.mu == pytest.approx(0.00375)
    assert options.freestream[1] == (0.15, 0.0, 0.0)
    assert options.freestream_state()[0] == pytest.approx(1.0)


# =============================================================================
# ACCEPTANCE RUNS
# =============================================================================

@pytest.mark.slow
def test_hex_accuracy_table(tmp_path):
    config = replace(load_case(CASES / "accuracy_hex.ini"), output_dir=str(tmp_path))
    coarse = run_case(config).report
    assert coarse.l1[0] == pytest.approx(2.147907e-2, rel=0.05)


@pytest.mark.acceptance
def test_hex_convergence_order(tmp_path):
    config = replace(load_case(CASES / "accuracy_hex.ini"), output_dir=str(tmp_path))
    coarse = run_case(config).report
    fine = run_case(replace(config, box_cells=(20, 20, 20))).report
    assert fine.l1[0] == pytest.approx(3.064556e-3, rel=0.05)
    assert convergence_orders([coarse.l1, fine.l1])[0][0] >= 2.7


@pytest.mark.slow
@pytest.mark.parametrize("path", ["two_step", "original"])
def test_tet_accuracy_table(tmp_path, path):
    config = replace(load_case(CASES / "accuracy_tet.ini"), output_dir=str(tmp_path), reconstruction=path)
    report = run_case(config).report
    assert report.l1[0] == pytest.approx(1.794963e-2, rel=0.10)


@pytest.mark.slow
def test_sod_tube_stays_in_the_envelope(tmp_path):
    config = replace(load_case(CASES / "sod.ini"), output_dir=str(tmp_path), write_vtk=False)
    result = run_case(config)
    x, rho, rho_exact = sod_profile(result.mesh, result.state)
    assert rho.min() >= 0.1 * 0.95
    assert rho.max() <= 1.1 * 1.05
    assert np.mean(np.abs(rho - rho_exact)) < 0.02


@pytest.mark.acceptance
def test_bench_on_the_hex_accuracy_mesh():
    config = replace(load_case(CASES / "accuracy_hex.ini"), box_cells=(20, 20, 20))
    mesh = build_mesh(config)
    reports = bench_reconstruction(mesh, initial_state(config, mesh), solver_options(config))
    assert reports["two_step"].reals_per_cell == 60.0
    assert reports["original"].reals_per_cell >= 276.0
    assert reports["two_step"].matrices == 0
    assert reports["original"].reconstruction_time >= 1.2 * reports["two_step"].reconstruction_time
