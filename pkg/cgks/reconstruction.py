"""
Compact third-order reconstruction on von Neumann stencils.

Two interchangeable quadratic paths share one output layout, coefficients
(Nc, 10, 5) on the zero-mean basis

    {1, Δx, Δy, Δz, Δx²-M200, Δy²-M020, Δz²-M002, ΔxΔy-M110, ΔyΔz-M011, ΔxΔz-M101}

- two_step: quadratic terms from a linear fit of the cell-averaged slopes,
  linear terms from a second linear fit of the corrected cell means. Only 3x3
  normal matrices are formed, on the fly, and nothing beyond the coefficients
  and the DF factor is kept between sweeps.
- original: constrained least squares (neighbour means exact, neighbour slopes
  in the least-squares sense) with a precomputed 9 x 4N_f matrix per cell and
  a stencil kept for the whole run.

Green-Gauss p¹, the multi-resolution WENO combination and the DF factor
complete the nonlinear reconstruction.
"""
import logging
from dataclasses import dataclass
from typing import Dict, Optional, Tuple

import numpy as np

from . import settings
from .kinetic import conserved_to_primitive
from .mesh import MAX_CELL_FACES, Mesh, second_moment_matrix, stencil_basis_means

logger = logging.getLogger("cgks.reconstruction")

N_COEFFS = 10
N_VARS = 5
SINGULAR_RATIO = 1e-10


# =============================================================================
# POLYNOMIAL EVALUATION
# =============================================================================

def basis_at(mesh: Mesh, cells: np.ndarray, x: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """Zero-mean basis values (P, 10) and gradients (P, 3, 10) of `cells` at points `x`."""
    d = np.asarray(x, dtype=float) - mesh.cell_centroid[cells]
    m = mesh.cell_moments[cells]
    dx, dy, dz = d[:, 0], d[:, 1], d[:, 2]
    one = np.ones_like(dx)
    zero = np.zeros_like(dx)
    values = np.stack([one, dx, dy, dz,
                       dx * dx - m[:, 3], dy * dy - m[:, 4], dz * dz - m[:, 5],
                       dx * dy - m[:, 6], dy * dz - m[:, 7], dx * dz - m[:, 8]], axis=1)
    grads = np.stack([
        np.stack([zero, one, zero, zero, 2 * dx, zero, zero, dy, zero, dz], axis=1),
        np.stack([zero, zero, one, zero, zero, 2 * dy, zero, dx, dz, zero], axis=1),
        np.stack([zero, zero, zero, one, zero, zero, 2 * dz, zero, dy, dx], axis=1),
    ], axis=1)
    return values, grads


def eval_poly(mesh: Mesh, coeffs: np.ndarray, cells: np.ndarray, x: np.ndarray,
              shift: Optional[np.ndarray] = None) -> Tuple[np.ndarray, np.ndarray]:
    """Value (P, 5) and gradient (P, 3, 5) of each cell's polynomial at its point.

    `shift` is the image translation of the cell: the point is pulled back by it first.
    """
    cells = np.asarray(cells)
    x = np.asarray(x, dtype=float)
    if shift is not None:
        x = x - shift
    values, grads = basis_at(mesh, cells, x)
    c = coeffs[cells]
    return np.einsum("pj,pjv->pv", values, c), np.einsum("pdj,pjv->pdv", grads, c)


def linear_coefficients(W: np.ndarray, grad: np.ndarray) -> np.ndarray:
    """Coefficients of the linear polynomial W̄ + g·Δx."""
    coeffs = np.zeros((W.shape[0], N_COEFFS, W.shape[-1]))
    coeffs[:, 0] = W
    coeffs[:, 1:4] = grad
    return coeffs


# =============================================================================
# STENCIL KERNELS
# =============================================================================

@dataclass(frozen=True, eq=False)
class LeastSquaresStencil:
    """Mean offsets and the least-squares projector P = (ΔᵀΔ)⁻¹Δᵀ of every cell."""
    neighbors: np.ndarray     # (Nc, 6), -1 where absent
    valid: np.ndarray         # (Nc, 6)
    basis_means: np.ndarray   # (Nc, 6, 9) neighbour means of the centre cell's zero-mean basis
    projector: np.ndarray     # (Nc, 3, 6), zero columns in absent slots
    singular: np.ndarray      # (Nc,)

    @property
    def offsets(self) -> np.ndarray:
        return self.basis_means[..., :3]

    @classmethod
    def build(cls, mesh: Mesh) -> "LeastSquaresStencil":
        valid = mesh.cell_neighbors >= 0
        means = stencil_basis_means(mesh)
        delta = means[..., :3]
        A = np.einsum("cmi,cmj->cij", delta, delta)
        inverse, singular = symmetric_inverse3(A)
        projector = inverse @ np.swapaxes(delta, 1, 2)
        return cls(mesh.cell_neighbors, valid, means, projector, singular)


def symmetric_inverse3(A: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """Cofactor inverse of symmetric 3x3 matrices; near-singular ones get zero."""
    a, b, c = A[:, 0, 0], A[:, 0, 1], A[:, 0, 2]
    d, e, f = A[:, 1, 1], A[:, 1, 2], A[:, 2, 2]
    c00 = d * f - e * e
    c01 = c * e - b * f
    c02 = b * e - c * d
    c11 = a * f - c * c
    c12 = b * c - a * e
    c22 = a * d - b * b
    det = a * c00 + b * c01 + c * c02
    trace = a + d + f
    singular = ~(det > SINGULAR_RATIO * trace ** 3)
    scale = np.where(singular, 0.0, 1.0 / np.where(singular, 1.0, det))
    inverse = np.stack([np.stack([c00, c01, c02], axis=-1),
                        np.stack([c01, c11, c12], axis=-1),
                        np.stack([c02, c12, c22], axis=-1)], axis=-2)
    return inverse * scale[:, None, None], singular


def neighbor_values(stencil: LeastSquaresStencil, values: np.ndarray) -> np.ndarray:
    """Gather (Nc, 6, …) neighbour values, zero in absent slots."""
    gathered = values[np.maximum(stencil.neighbors, 0)]
    mask = stencil.valid.reshape(stencil.valid.shape + (1,) * (values.ndim - 1))
    return np.where(mask, gathered, 0.0)


def linear_ls_fit(stencil: LeastSquaresStencil, v0: np.ndarray, v_nb: np.ndarray) -> np.ndarray:
    """Gradient g (Nc, 3, …) minimising Σ_m (v0 + g·δ_m - v_m)² over present neighbours."""
    nc = v0.shape[0]
    diff = (v_nb - v0[:, None]).reshape(nc, MAX_CELL_FACES, -1)
    return (stencil.projector @ diff).reshape((nc, 3) + v0.shape[1:])


def slot_values(mesh: Mesh, W: np.ndarray, boundary_means: Optional[np.ndarray] = None) -> np.ndarray:
    """(Nc, 6, 5) values across each face slot: neighbour means, ghost means on boundary faces."""
    nb = mesh.cell_neighbors
    out = W[np.maximum(nb, 0)]
    boundary = (nb < 0) & (mesh.cell_faces >= 0)
    if boundary_means is None:
        fill = np.broadcast_to(W[:, None, :], out.shape)
    else:
        fill = boundary_means[np.maximum(mesh.cell_faces, 0)]
    return np.where(boundary[..., None], fill, out)


def green_gauss_p1(mesh: Mesh, W: np.ndarray, alpha=1.0,
                   boundary_means: Optional[np.ndarray] = None) -> np.ndarray:
    """(α/|Ω0|) Σ_m ½(W̄_m + W̄_0) S_m n_m, returned as (Nc, 3, 5)."""
    faces = np.maximum(mesh.cell_faces, 0)
    present = mesh.cell_faces >= 0
    sn = (mesh.face_area[faces, None] * mesh.face_normal[faces]
          * mesh.cell_face_sign[..., None] * present[..., None])
    avg = 0.5 * (slot_values(mesh, W, boundary_means) + W[:, None, :])
    grad = np.einsum("cmi,cmv->civ", sn, avg)
    scale = np.broadcast_to(np.asarray(alpha, dtype=float), (mesh.n_cells,)) / mesh.cell_volume
    return grad * scale[:, None, None]


# =============================================================================
# QUADRATIC PATHS
# =============================================================================

def quadratic_from_hessian(H: np.ndarray, convention: str = "derivative") -> np.ndarray:
    """a4..a9 from slope gradients H[c, e, d, v] = ∂_e of the d-slope.

    `derivative` matches the plain Δx² basis (a4 = ∂x(∂xW)/2); `printed` uses
    a4 = b1 and a7 = (b1 + c1)/2 for A/B comparison.
    """
    b = H[:, :, 0]
    c = H[:, :, 1]
    d = H[:, :, 2]
    if convention == "derivative":
        return np.stack([b[:, 0] / 2, c[:, 1] / 2, d[:, 2] / 2,
                         (b[:, 1] + c[:, 0]) / 2, (c[:, 2] + d[:, 1]) / 2, (b[:, 2] + d[:, 0]) / 2], axis=1)
    if convention == "printed":
        return np.stack([b[:, 0], c[:, 1], d[:, 2],
                         (b[:, 0] + c[:, 0]) / 2, (c[:, 2] + d[:, 1]) / 2, (b[:, 2] + d[:, 0]) / 2], axis=1)
    raise ValueError(f"unknown quadratic convention {convention!r}")


def two_step_reconstruct(stencil: LeastSquaresStencil, W: np.ndarray, G: np.ndarray,
                         convention: str = "derivative") -> np.ndarray:
    """Quadratic coefficients (Nc, 10, 5) from cell means W (Nc, 5) and slopes G (Nc, 3, 5)."""
    nc = W.shape[0]
    values = np.concatenate([W, G.reshape(nc, -1)], axis=1)
    # absent slots meet zero projector columns
    diff = values[np.maximum(stencil.neighbors, 0)] - values[:, None]
    # Step 1: gradients of the three slope fields
    H = (stencil.projector @ diff[..., N_VARS:]).reshape(nc, 3, 3, N_VARS)
    coeffs = np.zeros((nc, N_COEFFS, N_VARS))
    coeffs[:, 0] = W
    coeffs[:, 4:] = quadratic_from_hessian(H, convention)
    # Step 2: linear terms from means with the quadratic part moved to the right-hand side
    corrected = diff[..., :N_VARS] - stencil.basis_means[..., 3:] @ coeffs[:, 4:]
    coeffs[:, 1:4] = stencil.projector @ corrected
    return coeffs


@dataclass(frozen=True, eq=False)
class ConstrainedOperator:
    """Per-cell 9 x 4N_f matrices of the constrained least-squares reconstruction.

    Columns are [mean jumps (6), x-slopes (6), y-slopes (6), z-slopes (6)] by face slot.
    """
    matrix: np.ndarray      # (Nc, 9, 24)
    deficient: np.ndarray   # (Nc,) fell back to plain least squares
    active: np.ndarray      # (Nc,) cells with a full neighbour set


def _constraint_rows(means: np.ndarray):
    """Constraint block C (n, nf, 9) and slope rows B (n, 3nf, 9) for one face count."""
    n, nf = means.shape[:2]
    e = means[..., :3]
    zero = np.zeros((n, nf))
    one = np.ones((n, nf))
    ex, ey, ez = e[..., 0], e[..., 1], e[..., 2]
    row_x = np.stack([one, zero, zero, 2 * ex, zero, zero, ey, zero, ez], axis=-1)
    row_y = np.stack([zero, one, zero, zero, 2 * ey, zero, ex, ez, zero], axis=-1)
    row_z = np.stack([zero, zero, one, zero, zero, 2 * ez, zero, ey, ex], axis=-1)
    return means, np.concatenate([row_x, row_y, row_z], axis=1)


def build_constrained_operator(mesh: Mesh) -> ConstrainedOperator:
    """Null-space elimination of the mean constraints, solved once per cell."""
    nc = mesh.n_cells
    matrix = np.zeros((nc, 9, 4 * MAX_CELL_FACES))
    deficient = np.zeros(nc, dtype=bool)
    active = mesh.cell_is_interior
    means = stencil_basis_means(mesh)
    h = np.cbrt(mesh.cell_volume)

    for nf in np.unique(mesh.cell_num_faces):
        ids = np.flatnonzero(active & (mesh.cell_num_faces == nf))
        if ids.size == 0:
            continue
        scale = np.concatenate([np.repeat(h[ids, None], 3, axis=1), np.repeat(h[ids, None] ** 2, 6, axis=1)], axis=1)
        C, B = _constraint_rows(means[ids, :nf])
        Cs = C * scale[:, None, :]
        Bs = B * scale[:, None, :]

        U, S, Vt = np.linalg.svd(Cs, full_matrices=True)
        rank_ok = S[:, -1] > SINGULAR_RATIO * S[:, 0]
        K = np.empty((ids.size, 9, 4 * nf))
        good = np.flatnonzero(rank_ok)
        if good.size:
            V = np.swapaxes(Vt[good], 1, 2)
            c_pinv = np.einsum("nij,nj,nkj->nik", V[:, :, :nf], 1.0 / S[good], U[good])
            null = V[:, :, nf:]
            bn_pinv = np.linalg.pinv(Bs[good] @ null)
            lift = null @ bn_pinv
            K[good, :, :nf] = c_pinv - lift @ Bs[good] @ c_pinv
            K[good, :, nf:] = lift
        bad = np.flatnonzero(~rank_ok)
        if bad.size:
            K[bad] = np.linalg.pinv(np.concatenate([Cs[bad], Bs[bad]], axis=1))
            deficient[ids[bad]] = True
            logger.warning(f"{bad.size} cells with {nf} faces fell back to unconstrained least squares")
        K *= scale[:, :, None]

        for block in range(4):
            matrix[ids, :, block * MAX_CELL_FACES:block * MAX_CELL_FACES + nf] = K[:, :, block * nf:(block + 1) * nf]
    return ConstrainedOperator(matrix, deficient, active)


def original_hweno_reconstruct(operator: ConstrainedOperator, stencil: LeastSquaresStencil,
                               W: np.ndarray, G: np.ndarray) -> np.ndarray:
    nc = W.shape[0]
    nb = np.maximum(stencil.neighbors, 0)
    # [mean jumps, x-slopes, y-slopes, z-slopes] by slot; absent slots meet zero operator columns
    rhs = np.concatenate([(W[nb] - W[:, None])[:, None], np.moveaxis(G[nb], 2, 1)], axis=1)
    coeffs = np.zeros((nc, N_COEFFS, N_VARS))
    coeffs[:, 0] = W
    coeffs[:, 1:] = operator.matrix @ rhs.reshape(nc, 4 * MAX_CELL_FACES, N_VARS)
    return coeffs


# =============================================================================
# NONLINEAR WEIGHTS
# =============================================================================

def smoothness_quadratic(mesh: Mesh, coeffs: np.ndarray) -> np.ndarray:
    """β₂ (Nc, 5) with the Ω^{2|α|/3 - 1} scaling, integrals from the cell moments."""
    a = coeffs
    lin = a[:, 1:4]
    slopes = np.stack([
        np.stack([2 * a[:, 4], a[:, 7], a[:, 9]], axis=1),
        np.stack([a[:, 7], 2 * a[:, 5], a[:, 8]], axis=1),
        np.stack([a[:, 9], a[:, 8], 2 * a[:, 6]], axis=1),
    ], axis=1)  # (Nc, d, component, v)
    m1 = mesh.cell_moments[:, :3]
    m2 = second_moment_matrix(mesh.cell_moments)
    first = (np.sum(lin * lin, axis=1)
             + 2 * np.einsum("cdv,cdiv,ci->cv", lin, slopes, m1)
             + np.einsum("cdiv,cij,cdjv->cv", slopes, m2, slopes))
    second = (4 * (a[:, 4] ** 2 + a[:, 5] ** 2 + a[:, 6] ** 2)
              + a[:, 7] ** 2 + a[:, 8] ** 2 + a[:, 9] ** 2)
    vol = mesh.cell_volume[:, None]
    return vol ** (2.0 / 3.0) * first + vol ** (4.0 / 3.0) * second


def smoothness_linear(mesh: Mesh, grad: np.ndarray) -> np.ndarray:
    return mesh.cell_volume[:, None] ** (2.0 / 3.0) * np.sum(grad * grad, axis=1)


def weno_weights(beta2: np.ndarray, beta1: np.ndarray, w0: np.ndarray,
                 gamma=settings.WENO_GAMMA, epsilon: float = settings.WENO_EPSILON) -> np.ndarray:
    """Normalised weights (…, 2) ordered (ω̄1, ω̄2)."""
    norm = w0 * w0 + beta1 + settings.WENO_BETA_FLOOR
    b1 = beta1 / norm
    b2 = beta2 / norm
    sigma = np.abs(b2 - b1)
    w1 = gamma[0] * (1.0 + (sigma / (epsilon + b1)) ** 2)
    w2 = gamma[1] * (1.0 + (sigma / (epsilon + b2)) ** 2)
    total = w1 + w2
    return np.stack([w1 / total, w2 / total], axis=-1)


def weno_combine(p2: np.ndarray, p1_grad: np.ndarray, beta2: np.ndarray, beta1: np.ndarray,
                 gamma=settings.WENO_GAMMA, epsilon: float = settings.WENO_EPSILON):
    """R = ω̄2·P2 + ω̄1·P1 with P2 = (p² - γ1·p¹)/γ2 and P1 = p¹.

    Returns (coefficients (Nc, 10, 5), weights (Nc, 5, 2)).
    """
    w = weno_weights(beta2, beta1, p2[:, 0], gamma, epsilon)
    w1 = w[..., 0][:, None]
    w2 = w[..., 1][:, None]
    p1 = linear_coefficients(p2[:, 0], p1_grad)
    big = (p2 - gamma[0] * p1) / gamma[1]
    out = w2 * big + w1 * p1
    out[:, 0] = p2[:, 0]
    return out, w


# =============================================================================
# DISCONTINUITY FEEDBACK
# =============================================================================

def df_factor(W_l: np.ndarray, W_r: np.ndarray, normal: np.ndarray, gamma: float = settings.GAMMA) -> np.ndarray:
    """α = 1/(1 + D²) from pressure and Mach-number jumps at each quadrature point."""
    rho_l, U_l, p_l = conserved_to_primitive(W_l, gamma)
    rho_r, U_r, p_r = conserved_to_primitive(W_r, gamma)
    normal = np.asarray(normal, dtype=float)

    def mach(rho, U, p):
        c = np.sqrt(gamma * p / rho)
        un = np.sum(U * normal, axis=-1)
        ut = np.linalg.norm(U - un[..., None] * normal, axis=-1)
        return un / c, ut / c

    mn_l, mt_l = mach(rho_l, U_l, p_l)
    mn_r, mt_r = mach(rho_r, U_r, p_r)
    jump = np.abs(p_l - p_r)
    D = jump / p_l + jump / p_r + (mn_l - mn_r) ** 2 + (mt_l - mt_r) ** 2
    return 1.0 / (1.0 + D * D)


def df_cell(mesh: Mesh, alpha_points: np.ndarray) -> np.ndarray:
    """Product of the point factors over every quadrature point of every face of each cell."""
    alpha = np.ones(mesh.n_cells)
    faces = mesh.point_face
    np.multiply.at(alpha, mesh.face_owner[faces], alpha_points)
    nb = mesh.face_neighbor[faces]
    inner = nb >= 0
    np.multiply.at(alpha, nb[inner], alpha_points[inner])
    return alpha


# =============================================================================
# RECONSTRUCTOR
# =============================================================================

@dataclass(frozen=True, eq=False)
class ReconstructionResult:
    coefficients: np.ndarray
    weights: Optional[np.ndarray]   # (Nc, 5, 2) WENO weights of interior cells, None when linear
    fallback: np.ndarray            # (Nc,) cells reduced to Green-Gauss p¹


class Reconstructor:
    """Runs one reconstruction path over the whole mesh and owns its persistent storage.

    The original path keeps its stencil and 9 x 24 operator for the whole run; the
    two-step path rebuilds the stencil from the cell moments on every sweep.
    """

    def __init__(self, mesh: Mesh, path: str = "two_step", convention: str = "derivative",
                 weno: bool = True):
        if path not in ("two_step", "original"):
            raise ValueError(f"unknown reconstruction path {path!r}")
        self.mesh = mesh
        self.path = path
        self.convention = convention
        self.weno = weno
        self.coefficients = np.zeros((mesh.n_cells, N_COEFFS, N_VARS))
        self.alpha = np.ones(mesh.n_cells)
        self.operator = build_constrained_operator(mesh) if path == "original" else None
        self.stencil = LeastSquaresStencil.build(mesh) if path == "original" else None
        interior = mesh.cell_is_interior
        logger.info(f"Reconstruction '{path}': {int(interior.sum())} interior cells, "
                    f"{mesh.n_cells - int(interior.sum())} boundary cells on Green-Gauss p1")

    def persistent_arrays(self) -> Dict[str, np.ndarray]:
        arrays = {
            "basis_moments": self.mesh.cell_moments,
            "coefficients": self.coefficients,
            "alpha": self.alpha,
        }
        if self.operator is not None:
            arrays["reconstruction_matrix"] = self.operator.matrix
        if self.stencil is not None:
            arrays["stencil_basis_means"] = self.stencil.basis_means
            arrays["stencil_projector"] = self.stencil.projector
        return arrays

    def persistent_matrices(self) -> Dict[str, np.ndarray]:
        return {k: v for k, v in self.persistent_arrays().items() if k == "reconstruction_matrix"}

    def persistent_reals_per_cell(self) -> float:
        return sum(a.size for a in self.persistent_arrays().values()) / self.mesh.n_cells

    def sweep_stencil(self) -> LeastSquaresStencil:
        return self.stencil if self.stencil is not None else LeastSquaresStencil.build(self.mesh)

    def quadratic(self, stencil: LeastSquaresStencil, W: np.ndarray, G: np.ndarray) -> np.ndarray:
        if self.path == "two_step":
            return two_step_reconstruct(stencil, W, G, self.convention)
        return original_hweno_reconstruct(self.operator, stencil, W, G)

    def reconstruct(self, W: np.ndarray, G: np.ndarray, alpha: Optional[np.ndarray] = None,
                    boundary_means: Optional[np.ndarray] = None) -> ReconstructionResult:
        mesh = self.mesh
        if alpha is not None:
            self.alpha[:] = alpha
        stencil = self.sweep_stencil()
        p2 = self.quadratic(stencil, W, G)

        fallback = ~mesh.cell_is_interior
        if self.path == "two_step":
            fallback = fallback | stencil.singular
            if np.any(stencil.singular & mesh.cell_is_interior):
                logger.warning(f"{int(np.sum(stencil.singular))} cells with degenerate stencils use Green-Gauss")

        weights = None
        coeffs = p2
        if self.weno or np.any(fallback):
            p1_grad = green_gauss_p1(mesh, W, self.alpha, boundary_means)
            if self.weno:
                ls_grad = linear_ls_fit(stencil, W, neighbor_values(stencil, W))
                beta1 = np.minimum(smoothness_linear(mesh, p1_grad), smoothness_linear(mesh, ls_grad))
                beta2 = smoothness_quadratic(mesh, p2)
                coeffs, weights = weno_combine(p2, p1_grad, beta2, beta1)
            coeffs[fallback] = linear_coefficients(W[fallback], p1_grad[fallback])
        self.coefficients[:] = coeffs
        return ReconstructionResult(coeffs, weights, fallback)
