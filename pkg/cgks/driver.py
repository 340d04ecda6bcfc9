"""
Run orchestration: case setup, error norms, accuracy studies, benchmarks and forces
"""
import logging
import time
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from . import exact, settings
from .config import CaseConfig
from .errors import ConfigError
from .evolution import Solver, SolverOptions, SolverState
from .kinetic import conserved_to_primitive
from .mesh import Mesh
from .mesh_tools import BoxSpec, gen_box, gen_ogrid, read_mesh
from .output import write_solution, write_table
from .reconstruction import Reconstructor, eval_poly
from .results import BenchRecord, NormRecord, RunRecord, init_db, record_run

logger = logging.getLogger("cgks.driver")

VARIABLES = ("rho", "rhoU", "rhoV", "rhoW", "rhoE")


@dataclass
class NormReport:
    """Cell-average error norms per conserved variable, plus run bookkeeping."""
    l1: np.ndarray
    l2: np.ndarray
    linf: np.ndarray
    cells: int = 0
    h: float = 0.0
    orders: Optional[Dict[str, np.ndarray]] = None
    timings: Dict[str, float] = field(default_factory=dict)
    reals_per_cell: float = 0.0

    def row(self, variable: int = 0) -> List:
        out = [self.cells, float(self.l1[variable]), float(self.l2[variable]), float(self.linf[variable])]
        if self.orders is not None:
            out += [float(self.orders[k][variable]) for k in ("l1", "l2", "linf")]
        return out


@dataclass
class RunResult:
    config: CaseConfig
    mesh: Mesh
    state: SolverState
    report: Optional[NormReport]
    outputs: List[Path] = field(default_factory=list)
    wall_time: float = 0.0


# =============================================================================
# SETUP
# =============================================================================

def build_mesh(config: CaseConfig) -> Mesh:
    if config.mesh_source == "box":
        spec = BoxSpec(config.box_lower, config.box_upper, config.box_cells, config.box_style, config.periodic)
        mesh = gen_box(spec)
    elif config.mesh_source == "ogrid":
        mesh = gen_ogrid(config.ogrid_r_inner, config.ogrid_r_outer, config.ogrid_n_radial,
                         config.ogrid_n_theta, config.ogrid_span, config.ogrid_stretch)
    else:
        mesh = read_mesh(config.mesh_source)
    names = {p.name for p in mesh.patches}
    for name in config.boundary:
        if name not in names:
            raise ConfigError(f"patch '{name}' does not exist in the mesh", "boundary", name)
    return mesh.with_patch_kinds(config.boundary)


def solver_options(config: CaseConfig) -> SolverOptions:
    fs = config.freestream
    return SolverOptions(gamma=config.gamma, mu=config.mu, c1=config.c1, c2=config.c2, cfl=config.cfl,
                         reconstruction=config.reconstruction, convention=config.convention, df=config.df,
                         weno=config.weno, mid_stage_slopes=config.mid_stage_slopes, workers=config.workers,
                         freestream=(fs.rho, tuple(fs.velocity), fs.pressure))


def initial_state(config: CaseConfig, mesh: Mesh) -> SolverState:
    gamma = config.gamma
    if config.initial == "sine_advection":
        W, G = exact.project(mesh, lambda x: exact.sine_wave(x, 0.0, gamma),
                             lambda x: exact.sine_wave_gradient(x, 0.0, gamma))
    elif config.initial == "sod":
        lo, hi = mesh.bounding_box[:, 0]
        W, _ = exact.project(mesh, lambda x: exact.shock_tube(x, 0.5 * (lo + hi), gamma=gamma),
                             lambda x: np.zeros(x.shape[:-1] + (3, 5)))
        G = np.zeros((mesh.n_cells, 3, 5))
    else:
        fs = config.freestream
        W = exact.uniform(mesh.cell_centroid, fs.rho, fs.velocity, fs.pressure, gamma)
        G = np.zeros((mesh.n_cells, 3, 5))
    return SolverState.initial(W, G)


# =============================================================================
# ERRORS
# =============================================================================

def error_norms(mesh: Mesh, W: np.ndarray, W_exact: np.ndarray) -> NormReport:
    """Volume-weighted L1, L2 and L∞ norms of the cell-average error."""
    err = np.abs(W - W_exact)
    vol = mesh.cell_volume[:, None]
    total = float(mesh.cell_volume.sum())
    return NormReport(
        l1=np.sum(err * vol, axis=0) / total,
        l2=np.sqrt(np.sum(err * err * vol, axis=0) / total),
        linf=np.max(err, axis=0),
        cells=mesh.n_cells,
        h=float(np.cbrt(total / mesh.n_cells)),
    )


def analytic_error(mesh: Mesh, state: SolverState, solution: str = "sine_advection",
                   t: Optional[float] = None, gamma: float = settings.GAMMA) -> NormReport:
    """Norms against exact cell averages of the analytic field at time t."""
    t = state.t if t is None else t
    if solution != "sine_advection":
        raise ValueError(f"no analytic solution for {solution!r}")
    W_exact, _ = exact.project(mesh, lambda x: exact.sine_wave(x, t, gamma),
                               lambda x: exact.sine_wave_gradient(x, t, gamma))
    return error_norms(mesh, state.W, W_exact)


def convergence_orders(errors: Sequence[np.ndarray], ratio: float = 2.0) -> List[np.ndarray]:
    """log_ratio(e_coarse / e_fine) between successive levels."""
    errors = [np.asarray(e, dtype=float) for e in errors]
    return [np.log(c / f) / np.log(ratio) for c, f in zip(errors[:-1], errors[1:])]


def sod_profile(mesh: Mesh, state: SolverState, gamma: float = settings.GAMMA,
                left=exact.SOD_LEFT, right=exact.SOD_RIGHT) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """(x, numerical ρ, exact ρ) at cell centroids."""
    lo, hi = mesh.bounding_box[:, 0]
    x = mesh.cell_centroid[:, 0]
    rho_exact, _, _ = exact.sod_exact(x, state.t, left, right, gamma, x0=0.5 * (lo + hi))
    return x, state.W[:, 0], rho_exact


# =============================================================================
# RUNS
# =============================================================================

def _record(config: CaseConfig, kind: str, cells: int, norms=(), benches=(), steps: int = 0,
            end_time: float = 0.0, wall_time: float = 0.0, db_url: Optional[str] = None) -> None:
    Session = init_db(db_url)
    session = Session()
    try:
        run = RunRecord(name=config.name, kind=kind, mesh=config.mesh_source, cells=cells,
                        reconstruction=config.reconstruction, weno=int(config.weno), df=int(config.df),
                        config_text=repr(config), steps=steps, end_time=end_time, wall_time=wall_time)
        record_run(session, run, norms, benches)
        logger.info(f"Recorded run {run.id} ({kind})")
    finally:
        session.close()


def run_case(config: CaseConfig, mesh: Optional[Mesh] = None, db_url: Optional[str] = None) -> RunResult:
    mesh = build_mesh(config) if mesh is None else mesh
    solver = Solver(mesh, solver_options(config))
    state = initial_state(config, mesh)
    out_dir = Path(config.output_dir)
    outputs: List[Path] = []

    def snapshot(s: SolverState):
        if config.write_vtk and config.vtk_every and s.step % config.vtk_every == 0:
            outputs.append(write_solution(mesh, s.W, out_dir / f"{config.name}_{s.step:06d}.vtk",
                                          s.alpha, config.gamma))

    start = time.perf_counter()
    state = solver.run(state, config.end_time, config.max_steps, config.log_every, snapshot)
    wall = time.perf_counter() - start

    report = None
    if config.initial == "sine_advection" and all(a in config.periodic for a in "xyz"):
        report = analytic_error(mesh, state, "sine_advection", gamma=config.gamma)
        logger.info(f"rho errors: L1={report.l1[0]:.6e} L2={report.l2[0]:.6e} Linf={report.linf[0]:.6e}")
    if report is not None:
        report.timings = dict(solver.timings)
        report.reals_per_cell = solver.reconstructor.persistent_reals_per_cell()
    if config.write_vtk:
        outputs.append(write_solution(mesh, state.W, out_dir / f"{config.name}.vtk", state.alpha, config.gamma))
    logger.info(f"Finished '{config.name}': {state.step} steps to t={state.t:.6g} in {wall:.2f}s")

    if config.record:
        norms = [] if report is None else [NormRecord(level=0, cells=mesh.n_cells, variable="rho",
                                                      l1=float(report.l1[0]), l2=float(report.l2[0]),
                                                      linf=float(report.linf[0]))]
        _record(config, "run", mesh.n_cells, norms, steps=state.step, end_time=state.t, wall_time=wall, db_url=db_url)
    return RunResult(config, mesh, state, report, outputs, wall)


def accuracy_study(config: CaseConfig, levels: int = 2, start_cells: Optional[int] = None,
                   db_url: Optional[str] = None) -> List[NormReport]:
    """Sine-advection runs on successively doubled boxes; ρ norms and orders to CSV."""
    n0 = start_cells or config.box_cells[0]
    reports: List[NormReport] = []
    for level in range(levels):
        n = n0 * 2 ** level
        level_config = replace(config, name=f"{config.name}_n{n}", box_cells=(n, n, n), write_vtk=False,
                               record=False)
        result = run_case(level_config)
        reports.append(result.report)

    for level, orders in enumerate(convergence_orders([r.l1 for r in reports]), start=1):
        reports[level].orders = {
            "l1": orders,
            "l2": convergence_orders([reports[level - 1].l2, reports[level].l2])[0],
            "linf": convergence_orders([reports[level - 1].linf, reports[level].linf])[0],
        }
        logger.info(f"level {level}: rho order L1={orders[0]:.3f}")

    header = ["cells", "l1", "l2", "linf", "order_l1", "order_l2", "order_linf"]
    rows = [r.row() + ([] if r.orders else ["", "", ""]) for r in reports]
    write_table(Path(config.output_dir) / f"{config.name}_accuracy.csv", header, rows)

    if config.record:
        norms = []
        for level, r in enumerate(reports):
            o = r.orders or {}
            norms.append(NormRecord(level=level, cells=r.cells, variable="rho", l1=float(r.l1[0]),
                                    l2=float(r.l2[0]), linf=float(r.linf[0]),
                                    order_l1=float(o["l1"][0]) if o else None,
                                    order_l2=float(o["l2"][0]) if o else None,
                                    order_linf=float(o["linf"][0]) if o else None))
        _record(config, "accuracy", reports[0].cells, norms, db_url=db_url)
    return reports


# =============================================================================
# BENCHMARK
# =============================================================================

@dataclass
class BenchReport:
    path: str
    reals_per_cell: float
    matrices: int
    reconstruction_time: float
    step_time: float


def bench_reconstruction(mesh: Mesh, state: SolverState, options: SolverOptions = SolverOptions(),
                         repetitions: int = 3, steps: int = 1) -> Dict[str, BenchReport]:
    """Memory ledger and timings of both reconstruction paths on the same state.

    Reconstruction time is the fastest of `repetitions` sweeps after one warm-up sweep.
    """
    reports = {}
    for path in ("two_step", "original"):
        solver = Solver(mesh, replace(options, reconstruction=path))
        recon: Reconstructor = solver.reconstructor
        ghosts = solver.boundary.ghost_means(state.W)
        recon.reconstruct(state.W, state.G, state.alpha, ghosts)
        sweeps = []
        for _ in range(repetitions):
            start = time.perf_counter()
            recon.reconstruct(state.W, state.G, state.alpha, ghosts)
            sweeps.append(time.perf_counter() - start)
        sweep = min(sweeps)

        dt = solver.compute_dt(state)
        s = state
        start = time.perf_counter()
        for _ in range(steps):
            s = solver.step(s, dt)
        step_time = (time.perf_counter() - start) / steps

        reports[path] = BenchReport(path, recon.persistent_reals_per_cell(),
                                    len(recon.persistent_matrices()), sweep, step_time)
        logger.info(f"{path}: {reports[path].reals_per_cell:.0f} reals/cell, "
                    f"reconstruction {sweep:.4f}s, step {step_time:.4f}s")
    recon_ratio = reports["original"].reconstruction_time / reports["two_step"].reconstruction_time
    step_ratio = reports["original"].step_time / reports["two_step"].step_time
    logger.info(f"original/two_step: reconstruction {recon_ratio:.3f}, step {step_ratio:.3f}")
    return reports


def bench_case(config: CaseConfig, repetitions: int = 3, steps: int = 1,
               db_url: Optional[str] = None) -> Dict[str, BenchReport]:
    mesh = build_mesh(config)
    reports = bench_reconstruction(mesh, initial_state(config, mesh), solver_options(config), repetitions, steps)
    header = ["path", "reals_per_cell", "matrices", "reconstruction_time", "step_time"]
    write_table(Path(config.output_dir) / f"{config.name}_bench.csv", header,
                [[r.path, r.reals_per_cell, r.matrices, r.reconstruction_time, r.step_time] for r in reports.values()])
    if config.record:
        benches = [BenchRecord(path=r.path, reals_per_cell=r.reals_per_cell, matrices=r.matrices,
                               reconstruction_time=r.reconstruction_time, step_time=r.step_time)
                   for r in reports.values()]
        _record(config, "bench", mesh.n_cells, benches=benches, db_url=db_url)
    return reports


# =============================================================================
# FORCES
# =============================================================================

@dataclass
class Forces:
    force: np.ndarray
    pressure: np.ndarray
    viscous: np.ndarray
    cd: float
    cl: float


def surface_forces(solver: Solver, state: SolverState, patch: str, q_ref: float, area_ref: float) -> Forces:
    """Force of the fluid on a wall patch: ∫ (p n - τ·n) dS with n out of the fluid."""
    mesh = solver.mesh
    gamma = solver.options.gamma
    mu = solver.options.mu
    coeffs = solver.reconstruct(state.W, state.G, state.alpha)
    pid = mesh.patch_index(patch)
    points = np.flatnonzero(mesh.face_patch[mesh.point_face] == pid)
    faces = mesh.point_face[points]
    W, G = eval_poly(mesh, coeffs, mesh.face_owner[faces], mesh.point_xyz[points])
    rho, U, p = conserved_to_primitive(W, gamma)
    grad_U = (G[..., 1:4] - G[..., 0:1] * U[:, None, :]) / rho[:, None, None]   # [d, i] = ∂_d U_i
    div = np.trace(grad_U, axis1=1, axis2=2)
    stress = mu * (grad_U + np.swapaxes(grad_U, 1, 2) - 2.0 / 3.0 * div[:, None, None] * np.eye(3))
    n = mesh.face_normal[faces]
    dS = (mesh.point_weight[points] * mesh.face_area[faces])[:, None]
    pressure = np.sum(p[:, None] * n * dS, axis=0)
    viscous = -np.sum(np.einsum("pij,pj->pi", stress, n) * dS, axis=0)
    force = pressure + viscous
    return Forces(force, pressure, viscous, float(force[0] / (q_ref * area_ref)),
                  float(force[1] / (q_ref * area_ref)))
