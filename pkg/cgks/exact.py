"""
Analytic solutions and their projection onto cell DOFs
"""
import logging
from dataclasses import dataclass
from typing import Callable, Optional, Sequence, Tuple

import numpy as np
from scipy.optimize import brentq

from . import settings
from .kinetic import primitive_to_conserved
from .mesh import Mesh, cell_quadrature

logger = logging.getLogger("cgks.exact")

SINE_AMPLITUDE = 0.2
SINE_VELOCITY = (1.0, 1.0, 1.0)
SINE_PRESSURE = 1.0

SOD_LEFT = (1.0, 0.0, 1.0)      # (ρ, u, p)
SOD_RIGHT = (0.125, 0.0, 0.1)


# =============================================================================
# SINE WAVE
# =============================================================================

def _phase(x: np.ndarray, t: float) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    U = np.asarray(SINE_VELOCITY)
    return np.pi * (np.sum(x, axis=-1) - float(np.sum(U)) * t)


def sine_wave(x: np.ndarray, t: float = 0.0, gamma: float = settings.GAMMA) -> np.ndarray:
    """ρ = 1 + 0.2 sin(π(x + y + z - 3t)) advected by U = (1, 1, 1) at p = 1."""
    rho = 1.0 + SINE_AMPLITUDE * np.sin(_phase(x, t))
    U = np.broadcast_to(np.asarray(SINE_VELOCITY), rho.shape + (3,))
    return primitive_to_conserved(rho, U, np.full_like(rho, SINE_PRESSURE), gamma)


def sine_wave_gradient(x: np.ndarray, t: float = 0.0, gamma: float = settings.GAMMA) -> np.ndarray:
    drho = SINE_AMPLITUDE * np.pi * np.cos(_phase(x, t))
    U = np.asarray(SINE_VELOCITY)
    # W is linear in ρ at fixed U and p
    dW_drho = np.concatenate([[1.0], U, [0.5 * float(U @ U)]])
    G = drho[..., None, None] * dW_drho
    return np.repeat(G, 3, axis=-2)


# =============================================================================
# RIEMANN PROBLEM
# =============================================================================

@dataclass(frozen=True)
class StarRegion:
    p: float
    u: float
    rho_left: float
    rho_right: float


def _wave_function(p: float, rho: float, p_k: float, c: float, gamma: float) -> float:
    if p > p_k:
        A = 2.0 / ((gamma + 1.0) * rho)
        B = (gamma - 1.0) / (gamma + 1.0) * p_k
        return (p - p_k) * np.sqrt(A / (p + B))
    return 2.0 * c / (gamma - 1.0) * ((p / p_k) ** ((gamma - 1.0) / (2.0 * gamma)) - 1.0)


def _star_density(p_star: float, rho: float, p: float, gamma: float) -> float:
    ratio = p_star / p
    if ratio > 1.0:
        g6 = (gamma - 1.0) / (gamma + 1.0)
        return rho * (ratio + g6) / (g6 * ratio + 1.0)
    return rho * ratio ** (1.0 / gamma)


def star_region(left: Sequence[float] = SOD_LEFT, right: Sequence[float] = SOD_RIGHT,
                gamma: float = settings.GAMMA) -> StarRegion:
    """Star pressure by root finding on the two wave functions."""
    rho_l, u_l, p_l = left
    rho_r, u_r, p_r = right
    c_l = np.sqrt(gamma * p_l / rho_l)
    c_r = np.sqrt(gamma * p_r / rho_r)
    if 2.0 * (c_l + c_r) / (gamma - 1.0) <= u_r - u_l:
        raise ValueError("initial data generate vacuum")

    def f(p):
        return _wave_function(p, rho_l, p_l, c_l, gamma) + _wave_function(p, rho_r, p_r, c_r, gamma) + u_r - u_l

    hi = max(p_l, p_r)
    while f(hi) < 0.0:
        hi *= 2.0
    p_star = brentq(f, 1e-14 * hi, hi, xtol=1e-14, rtol=1e-14)
    u_star = 0.5 * (u_l + u_r) + 0.5 * (_wave_function(p_star, rho_r, p_r, c_r, gamma)
                                        - _wave_function(p_star, rho_l, p_l, c_l, gamma))
    return StarRegion(p_star, u_star, _star_density(p_star, rho_l, p_l, gamma),
                      _star_density(p_star, rho_r, p_r, gamma))


def _sample_side(xi: np.ndarray, star: StarRegion, state: Sequence[float], gamma: float, sign: float):
    """Self-similar solution on one side of the contact; sign = +1 left, -1 right."""
    rho, u, p = state
    c = np.sqrt(gamma * p / rho)
    rho_star = star.rho_left if sign > 0 else star.rho_right
    # mirror the right side so both are handled as a left-facing wave
    s_xi = sign * xi
    s_u, s_ustar = sign * u, sign * star.u
    out_rho = np.full_like(xi, rho_star)
    out_u = np.full_like(xi, star.u)
    out_p = np.full_like(xi, star.p)

    if star.p > p:
        speed = s_u - c * np.sqrt((gamma + 1.0) / (2.0 * gamma) * star.p / p + (gamma - 1.0) / (2.0 * gamma))
        ahead = s_xi < speed
    else:
        head = s_u - c
        tail = s_ustar - c * (star.p / p) ** ((gamma - 1.0) / (2.0 * gamma))
        ahead = s_xi < head
        fan = (s_xi >= head) & (s_xi <= tail)
        c_fan = 2.0 / (gamma + 1.0) * (c + 0.5 * (gamma - 1.0) * (s_u - s_xi[fan]))
        out_u[fan] = sign * 2.0 / (gamma + 1.0) * (c + 0.5 * (gamma - 1.0) * s_u + s_xi[fan])
        out_rho[fan] = rho * (c_fan / c) ** (2.0 / (gamma - 1.0))
        out_p[fan] = p * (c_fan / c) ** (2.0 * gamma / (gamma - 1.0))
    out_rho[ahead] = rho
    out_u[ahead] = u
    out_p[ahead] = p
    return out_rho, out_u, out_p


def sod_exact(x: np.ndarray, t: float, left: Sequence[float] = SOD_LEFT,
              right: Sequence[float] = SOD_RIGHT, gamma: float = settings.GAMMA,
              x0: float = 0.5) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Exact (ρ, u, p) of the 1D Riemann problem at positions `x` and time t > 0."""
    x = np.atleast_1d(np.asarray(x, dtype=float))
    star = star_region(left, right, gamma)
    xi = (x - x0) / t
    rho = np.empty_like(xi)
    u = np.empty_like(xi)
    p = np.empty_like(xi)
    on_left = xi <= star.u
    for mask, state, sign in ((on_left, left, 1.0), (~on_left, right, -1.0)):
        r, v, q = _sample_side(xi[mask], star, state, gamma, sign)
        rho[mask], u[mask], p[mask] = r, v, q
    return rho, u, p


def shock_tube(x: np.ndarray, x0: float = 0.5, left: Sequence[float] = SOD_LEFT,
               right: Sequence[float] = SOD_RIGHT, gamma: float = settings.GAMMA) -> np.ndarray:
    """Conserved initial data of a shock tube along x."""
    x = np.asarray(x, dtype=float)
    is_left = x[..., 0] < x0
    rho = np.where(is_left, left[0], right[0])
    u = np.where(is_left, left[1], right[1])
    p = np.where(is_left, left[2], right[2])
    U = np.zeros(rho.shape + (3,))
    U[..., 0] = u
    return primitive_to_conserved(rho, U, p, gamma)


def uniform(x: np.ndarray, rho: float, U: Sequence[float], p: float,
            gamma: float = settings.GAMMA) -> np.ndarray:
    shape = np.shape(x)[:-1]
    return primitive_to_conserved(np.full(shape, rho), np.broadcast_to(np.asarray(U, dtype=float), shape + (3,)),
                                  np.full(shape, p), gamma)


# =============================================================================
# PROJECTION
# =============================================================================

def project(mesh: Mesh, field: Callable[[np.ndarray], np.ndarray],
            gradient: Optional[Callable[[np.ndarray], np.ndarray]] = None) -> Tuple[np.ndarray, np.ndarray]:
    """Cell averages (Nc, 5) and cell-averaged slopes (Nc, 3, 5) of an analytic field.

    Averages use the degree-4 cell rule. Slopes use the same rule on `gradient` when
    given, otherwise the surface integral ∮ field n dS / |Ω| on the face points.
    """
    points, weights = cell_quadrature(mesh)
    vol = mesh.cell_volume
    W = np.einsum("cq,cqv->cv", weights, field(points)) / vol[:, None]
    if gradient is not None:
        G = np.einsum("cq,cqdv->cdv", weights, gradient(points)) / vol[:, None, None]
        return W, G

    values = field(mesh.point_xyz)
    sn = (mesh.point_weight * mesh.face_area[mesh.point_face])[:, None] * mesh.face_normal[mesh.point_face]
    contrib = sn[:, :, None] * values[:, None, :]
    G = np.zeros((mesh.n_cells, 3, values.shape[-1]))
    np.add.at(G, mesh.face_owner[mesh.point_face], contrib)
    nb = mesh.face_neighbor[mesh.point_face]
    inner = nb >= 0
    np.add.at(G, nb[inner], -contrib[inner])
    return W, G / vol[:, None, None]
