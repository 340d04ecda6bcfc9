"""
Second-order time-dependent gas-kinetic interface flux.

Everything here works in the face-local frame (u1 along the face normal) and
broadcasts over quadrature points. `interface_flux` wraps the local kernel
with the rotation to and from global coordinates.
"""
import logging
from dataclasses import dataclass
from typing import Optional, Tuple

import numpy as np

from . import settings
from .kinetic import (EquilibriumState, MomentTable, cons_to_equilibrium, is_physical,
                      moment_table, psi_moments, slope_moments, solve_microslope,
                      solve_time_slope, transport_moments)

logger = logging.getLogger("cgks.flux")


@dataclass(frozen=True)
class CollisionTimeModel:
    mu: float = 0.0
    c1: float = settings.COLLISION_C1
    c2: float = settings.COLLISION_C2


@dataclass(frozen=True, eq=False)
class FluxSample:
    full: np.ndarray      # ∫_0^Δt F dt
    half: np.ndarray      # ∫_0^{Δt/2} F dt
    w_point: np.ndarray   # ∫ψ f dΞ at the requested time
    valid: np.ndarray     # w_point is physical


# =============================================================================
# FRAMES
# =============================================================================

def face_frames(normals: np.ndarray) -> np.ndarray:
    """Right-handed orthonormal rows (n, t1, t2) for each unit normal."""
    n = np.asarray(normals, dtype=float)
    helper = np.eye(3)[np.argmin(np.abs(n), axis=-1)]
    t1 = helper - np.sum(helper * n, axis=-1, keepdims=True) * n
    t1 /= np.linalg.norm(t1, axis=-1, keepdims=True)
    t2 = np.cross(n, t1)
    return np.stack([n, t1, t2], axis=-2)


def rotate_state(frame: np.ndarray, W: np.ndarray) -> np.ndarray:
    out = np.array(W, dtype=float, copy=True)
    out[..., 1:4] = np.einsum("...ij,...j->...i", frame, W[..., 1:4])
    return out


def unrotate_state(frame: np.ndarray, W: np.ndarray) -> np.ndarray:
    out = np.array(W, dtype=float, copy=True)
    out[..., 1:4] = np.einsum("...ji,...j->...i", frame, W[..., 1:4])
    return out


def rotate_gradient(frame: np.ndarray, G: np.ndarray) -> np.ndarray:
    """(…, 3, 5) gradient: derivative directions and momentum components into the frame."""
    directional = np.einsum("...ij,...jv->...iv", frame, G)
    out = directional.copy()
    out[..., 1:4] = np.einsum("...ij,...dj->...di", frame, directional[..., 1:4])
    return out


def unrotate_gradient(frame: np.ndarray, G: np.ndarray) -> np.ndarray:
    directional = np.einsum("...ji,...jv->...iv", frame, G)
    out = directional.copy()
    out[..., 1:4] = np.einsum("...ji,...dj->...di", frame, directional[..., 1:4])
    return out


# =============================================================================
# COLLISION TIME
# =============================================================================

def collision_time(p_l, p_r, mu: float, dt: float, c1: float = settings.COLLISION_C1,
                   c2: float = settings.COLLISION_C2, p_c=None) -> Tuple[np.ndarray, np.ndarray]:
    """Physical τ = μ/p and the numerical τ_num used in the exponential factors."""
    p_l = np.asarray(p_l, dtype=float)
    p_r = np.asarray(p_r, dtype=float)
    p_c = 0.5 * (p_l + p_r) if p_c is None else np.asarray(p_c, dtype=float)
    tau = mu / p_c
    tau_num = tau + c1 * dt + c2 * np.abs(p_l - p_r) / (p_l + p_r) * dt
    return tau, tau_num


def _decay(t, tau_num):
    safe = np.where(tau_num > 0.0, tau_num, 1.0)
    return np.where(tau_num > 0.0, np.exp(-t / safe), 0.0)


def time_integrals(T: float, tau, tau_num):
    """Exact ∫_0^T of the collision coefficients C1..C3 and of e^{-t/τn}·{1, t}."""
    eta = _decay(T, tau_num)
    i_e = tau_num * (1.0 - eta)
    i_te = tau_num * tau_num - tau_num * (T + tau_num) * eta
    i1 = T - i_e
    i2 = i_te + tau * i_e - tau * T
    i3 = 0.5 * T * T - tau * T + tau * i_e
    return i1, i2, i3, i_e, i_te


# =============================================================================
# FLUX KERNEL
# =============================================================================

def central_state(W_l: np.ndarray, W_r: np.ndarray, gamma: float,
                  tables: Optional[Tuple[MomentTable, MomentTable]] = None) -> EquilibriumState:
    """Equilibrium at the interface from the u1 > 0 half of g^l and the u1 < 0 half of g^r."""
    W_l = np.asarray(W_l, dtype=float)
    W_r = np.asarray(W_r, dtype=float)
    if tables is None:
        tables = (moment_table(cons_to_equilibrium(W_l, gamma)),
                  moment_table(cons_to_equilibrium(W_r, gamma)))
    t_l, t_r = tables
    W_c = W_l[..., 0:1] * psi_moments(t_l, "pos") + W_r[..., 0:1] * psi_moments(t_r, "neg")
    return cons_to_equilibrium(W_c, gamma)


def _microslopes(eq: EquilibriumState, G: np.ndarray) -> np.ndarray:
    """Spatial microslopes for the three local directions, (…, 3, 5)."""
    a = solve_microslope(eq, np.moveaxis(G, -2, 0))
    return np.moveaxis(a, 0, -2)


def _transport(table: MomentTable, part: str, a: np.ndarray, extra_u1: int) -> np.ndarray:
    """Σ_d ⟨u1^extra u_d a_d ψ⟩ over `part`."""
    return transport_moments(table, part, a, extra_u1)


def _directional(table: MomentTable, part: str, a: np.ndarray) -> np.ndarray:
    """⟨a_d ψ⟩ over `part` for each of the three slopes in `a` (…, 3, 5)."""
    return np.matmul(table.slope_matrix(part)[..., None, :, :], a[..., None])[..., 0]


def gks_flux_point(W_l: np.ndarray, G_l: np.ndarray, W_r: np.ndarray, G_r: np.ndarray,
                   dt: float, model: CollisionTimeModel = CollisionTimeModel(),
                   gamma: float = settings.GAMMA, t_point: Optional[float] = None) -> FluxSample:
    """Time-integrated flux over [0, Δt] and [0, Δt/2] plus the interface state at `t_point`.

    Inputs are local-frame conserved states (…, 5) and gradients (…, 3, 5) whose first
    derivative direction is the face normal. `t_point` defaults to Δt.
    """
    t_point = dt if t_point is None else t_point
    eq_l = cons_to_equilibrium(W_l, gamma)
    eq_r = cons_to_equilibrium(W_r, gamma)
    tab_l = moment_table(eq_l)
    tab_r = moment_table(eq_r)
    eq_c = central_state(W_l, W_r, gamma, (tab_l, tab_r))
    tab_c = moment_table(eq_c)

    a_l = _microslopes(eq_l, G_l)
    a_r = _microslopes(eq_r, G_r)
    A_l = solve_time_slope(eq_l, a_l, tab_l)
    A_r = solve_time_slope(eq_r, a_r, tab_r)

    rho_l = eq_l.rho[..., None]
    rho_r = eq_r.rho[..., None]
    rho_c = eq_c.rho[..., None]
    grad_c = (rho_l[..., None] * _directional(tab_l, "pos", a_l)
              + rho_r[..., None] * _directional(tab_r, "neg", a_r))
    a_c = _microslopes(eq_c, grad_c)
    A_c = solve_time_slope(eq_c, a_c, tab_c)

    tau, tau_num = collision_time(eq_l.p, eq_r.p, model.mu, dt, model.c1, model.c2, p_c=eq_c.p)
    tau = tau[..., None]
    tau_num = tau_num[..., None]

    # Flux moments
    eq_u = rho_c * psi_moments(tab_c, "full", a=1)
    eq_a = rho_c * _transport(tab_c, "full", a_c, 1)
    eq_A = rho_c * slope_moments(tab_c, "full", A_c, a=1)
    kin_u = rho_l * psi_moments(tab_l, "pos", a=1) + rho_r * psi_moments(tab_r, "neg", a=1)
    kin_A = rho_l * slope_moments(tab_l, "pos", A_l, a=1) + rho_r * slope_moments(tab_r, "neg", A_r, a=1)
    kin_a = rho_l * _transport(tab_l, "pos", a_l, 1) + rho_r * _transport(tab_r, "neg", a_r, 1)

    def integrated(T):
        i1, i2, i3, i_e, i_te = time_integrals(T, tau, tau_num)
        return (i1 * eq_u + i2 * eq_a + i3 * eq_A
                + i_e * (kin_u - tau * kin_A) - (tau * i_e + i_te) * kin_a)

    full = integrated(dt)
    half = integrated(0.5 * dt)

    # State moments at t_point
    eta = _decay(t_point, tau_num)
    c1 = 1.0 - eta
    c2 = (t_point + tau) * eta - tau
    c3 = t_point - tau + tau * eta
    w_eq = rho_c * (c1 * psi_moments(tab_c, "full") + c2 * _transport(tab_c, "full", a_c, 0)
                    + c3 * slope_moments(tab_c, "full", A_c))
    w_kin = (rho_l * (psi_moments(tab_l, "pos") - tau * slope_moments(tab_l, "pos", A_l)
                      - (tau + t_point) * _transport(tab_l, "pos", a_l, 0))
             + rho_r * (psi_moments(tab_r, "neg") - tau * slope_moments(tab_r, "neg", A_r)
                        - (tau + t_point) * _transport(tab_r, "neg", a_r, 0)))
    w_point = w_eq + eta * w_kin
    return FluxSample(full, half, w_point, is_physical(w_point))


def interface_flux(W_l: np.ndarray, G_l: np.ndarray, W_r: np.ndarray, G_r: np.ndarray,
                   normal: np.ndarray, dt: float, model: CollisionTimeModel = CollisionTimeModel(),
                   gamma: float = settings.GAMMA, t_point: Optional[float] = None,
                   frame: Optional[np.ndarray] = None) -> FluxSample:
    """Global-frame flux through a face with unit `normal`, left state on the normal's tail side."""
    frame = face_frames(normal) if frame is None else np.asarray(frame, dtype=float)
    sample = gks_flux_point(rotate_state(frame, W_l), rotate_gradient(frame, G_l),
                            rotate_state(frame, W_r), rotate_gradient(frame, G_r),
                            dt, model, gamma, t_point)
    return FluxSample(unrotate_state(frame, sample.full), unrotate_state(frame, sample.half),
                      unrotate_state(frame, sample.w_point), sample.valid)


def flux_linear_fit(flux_full: np.ndarray, flux_half: np.ndarray, dt: float):
    """(F0, ∂tF) of the linear-in-time flux whose integrals over Δt and Δt/2 are given."""
    flux_full = np.asarray(flux_full, dtype=float)
    flux_half = np.asarray(flux_half, dtype=float)
    f0 = (4.0 * flux_half - flux_full) / dt
    ft = 4.0 * (flux_full - 2.0 * flux_half) / (dt * dt)
    return f0, ft
