"""
Residual assembly, two-stage fourth-order stepping and the cell-slope update
"""
import logging
import time
from collections import defaultdict
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Callable, Dict, Optional, Tuple

import numpy as np

from . import settings
from .boundary import BoundaryConditions
from .errors import NonPhysicalStateError, SolverError
from .flux import (CollisionTimeModel, FluxSample, face_frames, flux_linear_fit, gks_flux_point,
                   rotate_gradient, rotate_state, unrotate_state)
from .kinetic import check_physical, conserved_to_primitive, is_physical, primitive_to_conserved
from .mesh import Mesh
from .reconstruction import Reconstructor, df_cell, df_factor, eval_poly

logger = logging.getLogger("cgks.evolution")

_LOCAL_NORMAL = np.array([1.0, 0.0, 0.0])


@dataclass(frozen=True)
class SolverOptions:
    gamma: float = settings.GAMMA
    mu: float = 0.0
    c1: float = settings.COLLISION_C1
    c2: float = settings.COLLISION_C2
    cfl: float = settings.CFL
    reconstruction: str = "two_step"
    convention: str = "derivative"
    df: bool = True
    weno: bool = True
    mid_stage_slopes: bool = True
    workers: int = settings.WORKERS
    freestream: Optional[Tuple[float, Tuple[float, float, float], float]] = None  # (ρ, U, p)

    @property
    def collision_model(self) -> CollisionTimeModel:
        return CollisionTimeModel(self.mu, self.c1, self.c2)

    def freestream_state(self) -> Optional[np.ndarray]:
        if self.freestream is None:
            return None
        rho, U, p = self.freestream
        return primitive_to_conserved(rho, np.asarray(U, dtype=float), p, self.gamma)


@dataclass(frozen=True, eq=False)
class SolverState:
    """Evolved cell DOFs: means W (Nc, 5), averaged slopes G (Nc, 3, 5) and the DF factor."""
    W: np.ndarray
    G: np.ndarray
    alpha: np.ndarray
    t: float = 0.0
    step: int = 0

    @classmethod
    def initial(cls, W: np.ndarray, G: Optional[np.ndarray] = None, t: float = 0.0) -> "SolverState":
        W = np.asarray(W, dtype=float)
        G = np.zeros((W.shape[0], 3, 5)) if G is None else np.asarray(G, dtype=float)
        return cls(W, G, np.ones(W.shape[0]), t, 0)

    def totals(self, mesh: Mesh) -> np.ndarray:
        """Σ W̄|Ω| for mass, momentum and energy."""
        return np.einsum("c,cv->v", mesh.cell_volume, self.W)


@dataclass(frozen=True, eq=False)
class Residual:
    """Time-integrated residuals of one stage.

    `full` and `half` are -(1/|Ω|) Σ ω S ∫F·n dt over [0, Δt] and [0, Δt/2]. The point
    arrays follow the mesh's flattened face quadrature.
    """
    full: np.ndarray           # (Nc, 5)
    half: np.ndarray           # (Nc, 5)
    w_point: np.ndarray        # (P, 5) global frame
    point_valid: np.ndarray    # (P,)
    alpha_points: np.ndarray   # (P,)


# =============================================================================
# SLOPES AND TIME STEP
# =============================================================================

def update_slopes(mesh: Mesh, w_point: np.ndarray, W: np.ndarray,
                  valid: Optional[np.ndarray] = None, alpha=None) -> np.ndarray:
    """Cell-averaged slopes from interface states by the divergence theorem, (Nc, 3, 5).

    Each cell sums ω S n (W_p - W̄) over its faces, which equals Σ ω S n W_p on a closed
    surface. Points flagged invalid contribute nothing.
    """
    faces = mesh.point_face
    owner = mesh.face_owner[faces]
    nb = mesh.face_neighbor[faces]
    inner = nb >= 0
    sn = (mesh.point_weight * mesh.face_area[faces])[:, None] * mesh.face_normal[faces]
    keep = np.ones(faces.size, dtype=bool) if valid is None else np.asarray(valid, dtype=bool)

    G = np.zeros((mesh.n_cells, 3, 5))
    d_owner = np.where(keep[:, None], w_point - W[owner], 0.0)
    np.add.at(G, owner, sn[:, :, None] * d_owner[:, None, :])
    d_nb = np.where(keep[inner, None], w_point[inner] - W[nb[inner]], 0.0)
    np.add.at(G, nb[inner], -sn[inner, :, None] * d_nb[:, None, :])
    G /= mesh.cell_volume[:, None, None]
    if alpha is not None:
        G *= np.broadcast_to(np.asarray(alpha, dtype=float), (mesh.n_cells,))[:, None, None]
    return G


def compute_dt(mesh: Mesh, W: np.ndarray, cfl: float = settings.CFL, gamma: float = settings.GAMMA,
               mu: float = 0.0) -> float:
    """CFL · min over cells of h / (max|U·n| + c + 2μ/(ρh)), h = |Ω| / Σ S."""
    rho, U, p = conserved_to_primitive(W, gamma)
    faces = np.maximum(mesh.cell_faces, 0)
    present = mesh.cell_faces >= 0
    area = np.where(present, mesh.face_area[faces], 0.0)
    h = mesh.cell_volume / area.sum(axis=1)
    un = np.abs(np.einsum("cfd,cd->cf", mesh.face_normal[faces], U))
    un_max = np.max(np.where(present, un, 0.0), axis=1)
    c = np.sqrt(gamma * p / rho)
    speed = un_max + c + 2.0 * mu / (rho * h)
    return float(cfl * np.min(h / speed))


# =============================================================================
# SOLVER
# =============================================================================

class Solver:
    """Drives reconstruction, fluxes and the two-stage update on one mesh."""

    def __init__(self, mesh: Mesh, options: SolverOptions = SolverOptions()):
        self.mesh = mesh
        self.options = options
        self.model = options.collision_model
        self.reconstructor = Reconstructor(mesh, options.reconstruction, options.convention, options.weno)
        self.boundary = BoundaryConditions(mesh, options.freestream_state(), options.gamma)
        self.timings: Dict[str, float] = defaultdict(float)

        faces = mesh.point_face
        self.point_owner = mesh.face_owner[faces]
        self.point_neighbor = mesh.face_neighbor[faces]
        self.point_inner = np.flatnonzero(self.point_neighbor >= 0)
        self.point_boundary = np.flatnonzero(self.point_neighbor < 0)
        self.point_shift = mesh.face_shift[faces]
        self.point_frames = face_frames(mesh.face_normal)[faces]
        self.point_area = mesh.point_weight * mesh.face_area[faces]

    # ------------------------------------------------------------------ stages

    def reconstruct(self, W: np.ndarray, G: np.ndarray, alpha: np.ndarray) -> np.ndarray:
        start = time.perf_counter()
        result = self.reconstructor.reconstruct(W, G, alpha, self.boundary.ghost_means(W))
        self.timings["reconstruction"] += time.perf_counter() - start
        return result.coefficients

    def interface_states(self, coeffs: np.ndarray, W: np.ndarray):
        """Left/right values and gradients at every face point, in the face-local frame."""
        mesh = self.mesh
        frames = self.point_frames
        Wl, Gl = eval_poly(mesh, coeffs, self.point_owner, mesh.point_xyz)
        Wr = np.zeros_like(Wl)
        Gr = np.zeros_like(Gl)
        inner = self.point_inner
        Wn, Gn = eval_poly(mesh, coeffs, self.point_neighbor[inner], mesh.point_xyz[inner], self.point_shift[inner])
        self._first_order_where_bad(Wl, Gl, W, self.point_owner)
        self._first_order_where_bad(Wn, Gn, W, self.point_neighbor[inner])
        Wr[inner] = Wn
        Gr[inner] = Gn

        Wl = rotate_state(frames, Wl)
        Gl = rotate_gradient(frames, Gl)
        Wr = rotate_state(frames, Wr)
        Gr = rotate_gradient(frames, Gr)
        bnd = self.point_boundary
        if bnd.size:
            ghost = self.boundary.ghost_points(mesh.point_face[bnd], Wl[bnd], Gl[bnd], frames[bnd])
            Wr[bnd] = ghost.W
            Gr[bnd] = ghost.G
        return Wl, Gl, Wr, Gr

    @staticmethod
    def _first_order_where_bad(Wp: np.ndarray, Gp: np.ndarray, W: np.ndarray, cells: np.ndarray) -> None:
        """In place: points whose reconstructed state is non-physical take the cell mean, flat."""
        bad = ~is_physical(Wp)
        if np.any(bad):
            logger.warning(f"{int(bad.sum())} non-physical reconstructed point states replaced by cell means")
            Wp[bad] = W[cells[bad]]
            Gp[bad] = 0.0

    def _flux_chunk(self, lo: int, hi: int, Wl, Gl, Wr, Gr, dt: float, t_point: float) -> FluxSample:
        try:
            return gks_flux_point(Wl[lo:hi], Gl[lo:hi], Wr[lo:hi], Gr[lo:hi], dt, self.model,
                                  self.options.gamma, t_point)
        except NonPhysicalStateError as e:
            point = lo + (e.cell or 0)
            face = int(self.mesh.point_face[point])
            raise NonPhysicalStateError(f"unusable interface state at face {face}", e.component,
                                        int(self.point_owner[point])) from e

    def point_fluxes(self, Wl, Gl, Wr, Gr, dt: float, t_point: float) -> FluxSample:
        """Flux samples at all points, split into contiguous chunks across worker threads."""
        n = Wl.shape[0]
        workers = max(1, min(self.options.workers, n))
        bounds = np.linspace(0, n, workers + 1).astype(int)
        if workers == 1:
            return self._flux_chunk(0, n, Wl, Gl, Wr, Gr, dt, t_point)
        with ThreadPoolExecutor(max_workers=workers) as pool:
            futures = [pool.submit(self._flux_chunk, lo, hi, Wl, Gl, Wr, Gr, dt, t_point)
                       for lo, hi in zip(bounds[:-1], bounds[1:])]
            samples = [f.result() for f in futures]
        return FluxSample(*(np.concatenate([getattr(s, name) for s in samples])
                            for name in ("full", "half", "w_point", "valid")))

    def _gather(self, face_values: np.ndarray) -> np.ndarray:
        """-(1/|Ω|) Σ over each cell's faces, owner side negative, in fixed face order."""
        mesh = self.mesh
        out = np.zeros((mesh.n_cells, face_values.shape[1]))
        np.add.at(out, mesh.face_owner, -face_values)
        inner = mesh.face_neighbor >= 0
        np.add.at(out, mesh.face_neighbor[inner], face_values[inner])
        return out / mesh.cell_volume[:, None]

    def residual(self, coeffs: np.ndarray, W: np.ndarray, dt: float,
                 t_point: Optional[float] = None) -> Residual:
        mesh = self.mesh
        start = time.perf_counter()
        Wl, Gl, Wr, Gr = self.interface_states(coeffs, W)
        sample = self.point_fluxes(Wl, Gl, Wr, Gr, dt, dt if t_point is None else t_point)
        frames = self.point_frames

        weight = self.point_area[:, None]
        face_full = np.zeros((mesh.n_faces, 5))
        face_half = np.zeros((mesh.n_faces, 5))
        np.add.at(face_full, mesh.point_face, weight * unrotate_state(frames, sample.full))
        np.add.at(face_half, mesh.point_face, weight * unrotate_state(frames, sample.half))

        if self.options.df:
            alpha_points = df_factor(Wl, Wr, _LOCAL_NORMAL, self.options.gamma)
        else:
            alpha_points = np.ones(Wl.shape[0])
        result = Residual(self._gather(face_full), self._gather(face_half),
                          unrotate_state(frames, sample.w_point), sample.valid, alpha_points)
        self.timings["flux"] += time.perf_counter() - start
        return result

    # ------------------------------------------------------------------ stepping

    def _checked(self, W: np.ndarray, t: float, step: int) -> np.ndarray:
        try:
            check_physical(W, time=t)
        except NonPhysicalStateError as e:
            logger.error(f"Step {step} aborted: {e}")
            raise
        return W

    def _slopes_from(self, stage: Residual, W: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
        """(G, α) from a stage's interface states sampled at the time W belongs to."""
        invalid = int(np.sum(~stage.point_valid))
        if invalid:
            logger.warning(f"{invalid} non-physical interface states skipped in the slope update")
        alpha = df_cell(self.mesh, stage.alpha_points) if self.options.df else np.ones(self.mesh.n_cells)
        return update_slopes(self.mesh, stage.w_point, W, stage.point_valid, alpha), alpha

    def step(self, state: SolverState, dt: float) -> SolverState:
        """One two-stage fourth-order step.

        With `mid_stage_slopes` the slopes and DF factor are also refreshed at t + Δt/2
        from the stage-1 interface states, so stage 2 reconstructs from slopes that match
        W_mid; otherwise stage 2 reuses the stage-start slopes.
        """
        W, G = state.W, state.G
        coeffs = self.reconstruct(W, G, state.alpha)
        stage1 = self.residual(coeffs, W, dt, t_point=0.5 * dt)
        L, Lt = flux_linear_fit(stage1.full, stage1.half, dt)

        start = time.perf_counter()
        W_mid = self._checked(W + 0.5 * dt * L + 0.125 * dt * dt * Lt, state.t + 0.5 * dt, state.step)
        if self.options.mid_stage_slopes:
            G_mid, alpha_mid = self._slopes_from(stage1, W_mid)
        else:
            G_mid, alpha_mid = G, state.alpha
        self.timings["update"] += time.perf_counter() - start

        coeffs_mid = self.reconstruct(W_mid, G_mid, alpha_mid)
        # stage 2 starts at t + Δt/2, so its interface states at Δt/2 belong to t + Δt
        stage2 = self.residual(coeffs_mid, W_mid, dt, t_point=0.5 * dt)
        _, Lt_mid = flux_linear_fit(stage2.full, stage2.half, dt)

        start = time.perf_counter()
        W_new = self._checked(W + dt * L + dt * dt / 6.0 * (Lt + 2.0 * Lt_mid), state.t + dt, state.step)
        G_new, alpha = self._slopes_from(stage2, W_new)
        self.timings["update"] += time.perf_counter() - start
        return SolverState(W_new, G_new, alpha, state.t + dt, state.step + 1)

    def compute_dt(self, state: SolverState) -> float:
        return compute_dt(self.mesh, state.W, self.options.cfl, self.options.gamma, self.options.mu)

    def run(self, state: SolverState, end_time: float, max_steps: int = 1_000_000, log_every: int = 10,
            callback: Optional[Callable[[SolverState], None]] = None) -> SolverState:
        """Step until `end_time` (last step clipped) or `max_steps`."""
        logger.info(f"Running to t={end_time:g} on {self.mesh.n_cells} cells "
                    f"({self.options.reconstruction}, df={self.options.df}, weno={self.options.weno})")
        while state.t < end_time * (1.0 - 1e-14) and state.step < max_steps:
            dt = min(self.compute_dt(state), end_time - state.t)
            previous = state
            try:
                state = self.step(state, dt)
            except NonPhysicalStateError as e:
                raise SolverError(str(e), step=previous.step, time=previous.t) from e
            if log_every and state.step % log_every == 0:
                change = np.sqrt(np.mean((state.W - previous.W) ** 2, axis=0)) / dt
                logger.info(f"step {state.step} t={state.t:.6g} dt={dt:.4g} "
                            f"|dW/dt| rho={change[0]:.3e} E={change[4]:.3e}")
            if callback is not None:
                callback(state)
        return state
