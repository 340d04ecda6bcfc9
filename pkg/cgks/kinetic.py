"""
Maxwellian algebra: state conversion, velocity moments and microslope solves.

All functions broadcast over leading axes, so the same code serves a single
state in a test and every face quadrature point in a residual sweep.
Conserved vectors are ordered (ρ, ρU1, ρU2, ρU3, ρE); microslopes s are the
coefficients of s1 + s2·u1 + s3·u2 + s4·u3 + s5·½(|u|² + ξ²).
"""
import logging
from dataclasses import dataclass, field
from typing import Dict, Optional, Tuple

import numpy as np
from scipy.special import erfc

from .errors import NonPhysicalStateError

logger = logging.getLogger("cgks.kinetic")

TABLE_ORDER = 6


def internal_dof(gamma: float) -> float:
    """K = (5 - 3γ)/(γ - 1), the internal degrees of freedom in 3D."""
    return (5.0 - 3.0 * gamma) / (gamma - 1.0)


@dataclass(frozen=True, eq=False)
class EquilibriumState:
    rho: np.ndarray
    U: np.ndarray
    lam: np.ndarray
    K: float
    gamma: float

    @property
    def p(self) -> np.ndarray:
        return self.rho / (2.0 * self.lam)

    @property
    def sound_speed(self) -> np.ndarray:
        return np.sqrt(self.gamma / (2.0 * self.lam))


def _first_bad(mask: np.ndarray) -> Optional[int]:
    bad = np.flatnonzero(np.ravel(mask))
    return int(bad[0]) if bad.size else None


def check_physical(W: np.ndarray, time: Optional[float] = None) -> None:
    """Raise NonPhysicalStateError naming the component and flat index of the first bad state."""
    W = np.asarray(W, dtype=float)
    rho = W[..., 0]
    bad = _first_bad(~(rho > 0.0))
    if bad is not None:
        raise NonPhysicalStateError("non-positive density", component="density", cell=bad, time=time)
    e = W[..., 4] - 0.5 * np.sum(W[..., 1:4] ** 2, axis=-1) / rho
    bad = _first_bad(~(e > 0.0))
    if bad is not None:
        raise NonPhysicalStateError("non-positive internal energy", component="energy", cell=bad, time=time)


def is_physical(W: np.ndarray) -> np.ndarray:
    W = np.asarray(W, dtype=float)
    rho = W[..., 0]
    with np.errstate(divide="ignore", invalid="ignore"):
        e = W[..., 4] - 0.5 * np.sum(W[..., 1:4] ** 2, axis=-1) / rho
    return (rho > 0.0) & (e > 0.0) & np.all(np.isfinite(W), axis=-1)


def cons_to_equilibrium(W: np.ndarray, gamma: float) -> EquilibriumState:
    W = np.asarray(W, dtype=float)
    check_physical(W)
    rho = W[..., 0]
    U = W[..., 1:4] / rho[..., None]
    e = W[..., 4] - 0.5 * rho * np.sum(U * U, axis=-1)
    K = internal_dof(gamma)
    lam = (K + 3.0) * rho / (4.0 * e)
    return EquilibriumState(rho, U, lam, K, gamma)


def primitive_to_conserved(rho, U, p, gamma: float) -> np.ndarray:
    rho = np.asarray(rho, dtype=float)
    U = np.asarray(U, dtype=float)
    p = np.asarray(p, dtype=float)
    W = np.empty(np.broadcast_shapes(rho.shape, U.shape[:-1], p.shape) + (5,))
    W[..., 0] = rho
    W[..., 1:4] = rho[..., None] * U
    W[..., 4] = p / (gamma - 1.0) + 0.5 * rho * np.sum(U * U, axis=-1)
    return W


def conserved_to_primitive(W: np.ndarray, gamma: float) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """(ρ, U, p) without physicality checks."""
    W = np.asarray(W, dtype=float)
    rho = W[..., 0]
    U = W[..., 1:4] / rho[..., None]
    p = (gamma - 1.0) * (W[..., 4] - 0.5 * rho * np.sum(U * U, axis=-1))
    return rho, U, p


def euler_flux(W: np.ndarray, gamma: float) -> np.ndarray:
    """Inviscid flux along the first axis."""
    rho, U, p = conserved_to_primitive(W, gamma)
    F = np.empty_like(np.asarray(W, dtype=float))
    F[..., 0] = rho * U[..., 0]
    F[..., 1:4] = rho[..., None] * U[..., 0:1] * U
    F[..., 1] += p
    F[..., 4] = U[..., 0] * (W[..., 4] + p)
    return F


@dataclass(frozen=True, eq=False)
class MomentTable:
    """Normalised moments ⟨·⟩ = (1/ρ)∫(·)g dΞ of one Maxwellian (broadcast over states)."""
    u: np.ndarray          # (..., 3, n+1) full moments of u1, u2, u3
    u1_pos: np.ndarray     # (..., n+1) over u1 > 0
    u1_neg: np.ndarray     # (..., n+1) over u1 < 0
    xi: np.ndarray         # (..., 3) ⟨ξ⁰⟩, ⟨ξ²⟩, ⟨ξ⁴⟩
    _cache: Dict = field(default_factory=dict, repr=False)

    def u1(self, part: str) -> np.ndarray:
        if part == "full":
            return self.u[..., 0, :]
        if part == "pos":
            return self.u1_pos
        if part == "neg":
            return self.u1_neg
        raise ValueError(f"unknown moment part {part!r}")

    def monomial(self, part: str, a: int, b: int, c: int, d: int = 0) -> np.ndarray:
        """⟨u1^a u2^b u3^c ξ^(2d)⟩ with the u1 factor taken over `part`."""
        key = (part, a, b, c, d)
        cached = self._cache.get(key)
        if cached is None:
            cached = self.u1(part)[..., a] * self.u[..., 1, b] * self.u[..., 2, c] * self.xi[..., d]
            self._cache[key] = cached
        return cached

    def psi(self, part: str, a: int = 0, b: int = 0, c: int = 0, d: int = 0) -> np.ndarray:
        """⟨u1^a u2^b u3^c ξ^(2d) ψ⟩, (…, 5)."""
        key = ("psi", part, a, b, c, d)
        cached = self._cache.get(key)
        if cached is None:
            m = self.monomial
            cached = np.stack([
                m(part, a, b, c, d),
                m(part, a + 1, b, c, d),
                m(part, a, b + 1, c, d),
                m(part, a, b, c + 1, d),
                0.5 * (m(part, a + 2, b, c, d) + m(part, a, b + 2, c, d)
                       + m(part, a, b, c + 2, d) + m(part, a, b, c, d + 1)),
            ], axis=-1)
            self._cache[key] = cached
        return cached

    def slope_matrix(self, part: str, a: int = 0, b: int = 0, c: int = 0) -> np.ndarray:
        """(…, 5, 5) matrix M with M @ s = ⟨u1^a u2^b u3^c s ψ⟩."""
        key = ("slope", part, a, b, c)
        cached = self._cache.get(key)
        if cached is None:
            p = self.psi
            energy = 0.5 * (p(part, a + 2, b, c) + p(part, a, b + 2, c)
                            + p(part, a, b, c + 2) + p(part, a, b, c, 1))
            cached = np.stack([p(part, a, b, c), p(part, a + 1, b, c), p(part, a, b + 1, c),
                               p(part, a, b, c + 1), energy], axis=-1)
            self._cache[key] = cached
        return cached

    def transport_matrix(self, part: str, extra_u1: int = 0) -> np.ndarray:
        """(…, 5, 15) matrix T with T @ [s_1, s_2, s_3] = Σ_d ⟨u1^extra u_d s_d ψ⟩."""
        key = ("transport", part, extra_u1)
        cached = self._cache.get(key)
        if cached is None:
            cached = np.concatenate([self.slope_matrix(part, extra_u1 + 1),
                                     self.slope_matrix(part, extra_u1, b=1),
                                     self.slope_matrix(part, extra_u1, c=1)], axis=-1)
            self._cache[key] = cached
        return cached


def _recursion(m: np.ndarray, U: np.ndarray, lam: np.ndarray, order: int) -> None:
    for n in range(order - 1):
        m[..., n + 2] = U * m[..., n + 1] + (n + 1) / (2.0 * lam) * m[..., n]


def moment_table(eq: EquilibriumState, order: int = TABLE_ORDER) -> MomentTable:
    lam = np.asarray(eq.lam, dtype=float)
    U = np.asarray(eq.U, dtype=float)
    full = np.zeros(U.shape + (order + 1,))
    full[..., 0] = 1.0
    full[..., 1] = U
    _recursion(full, U, lam[..., None], order)

    u1 = U[..., 0]
    gauss = 0.5 * np.exp(-lam * u1 * u1) / np.sqrt(np.pi * lam)
    pos = np.zeros(u1.shape + (order + 1,))
    neg = np.zeros(u1.shape + (order + 1,))
    pos[..., 0] = 0.5 * erfc(-np.sqrt(lam) * u1)
    neg[..., 0] = 0.5 * erfc(np.sqrt(lam) * u1)
    pos[..., 1] = u1 * pos[..., 0] + gauss
    neg[..., 1] = u1 * neg[..., 0] - gauss
    _recursion(pos, u1, lam, order)
    _recursion(neg, u1, lam, order)

    K = eq.K
    xi = np.stack([np.ones_like(lam), K / (2.0 * lam), (K * K + 2.0 * K) / (4.0 * lam * lam)], axis=-1)
    return MomentTable(full, pos, neg, xi)


def psi_moments(table: MomentTable, part: str, a: int = 0, b: int = 0, c: int = 0,
                d: int = 0) -> np.ndarray:
    """⟨u1^a u2^b u3^c ξ^(2d) ψ⟩ for ψ = (1, u1, u2, u3, ½(|u|² + ξ²))."""
    return table.psi(part, a, b, c, d)


def slope_moments(table: MomentTable, part: str, s: np.ndarray, a: int = 0, b: int = 0,
                  c: int = 0) -> np.ndarray:
    """⟨u1^a u2^b u3^c s(u, ξ) ψ⟩ for a microslope s."""
    s = np.asarray(s, dtype=float)
    return np.matmul(table.slope_matrix(part, a, b, c), s[..., None])[..., 0]


def transport_moments(table: MomentTable, part: str, slopes: np.ndarray, extra_u1: int = 0) -> np.ndarray:
    """Σ_d ⟨u1^extra u_d a_d ψ⟩ for microslopes `slopes` (…, 3, 5)."""
    slopes = np.asarray(slopes, dtype=float)
    flat = slopes.reshape(slopes.shape[:-2] + (15,))
    return np.matmul(table.transport_matrix(part, extra_u1), flat[..., None])[..., 0]


def solve_microslope(eq: EquilibriumState, dW: np.ndarray) -> np.ndarray:
    """Closed-form solution of ⟨s ψ⟩ = ∂W/ρ by successive elimination."""
    dW = np.asarray(dW, dtype=float)
    rho = np.asarray(eq.rho)[..., None]
    lam = np.asarray(eq.lam)
    U = np.asarray(eq.U)
    K = eq.K
    b = dW / rho
    U2 = np.sum(U * U, axis=-1)
    B = U2 + (K + 3.0) / (2.0 * lam)
    R = b[..., 1:4] - U * b[..., 0:1]
    R5 = 2.0 * b[..., 4] - B * b[..., 0]
    s = np.empty(np.broadcast_shapes(b.shape, U.shape[:-1] + (5,)))
    s[..., 4] = 4.0 * lam * lam / (K + 3.0) * (R5 - 2.0 * np.sum(U * R, axis=-1))
    s[..., 1:4] = 2.0 * lam[..., None] * R - U * s[..., 4:5]
    s[..., 0] = b[..., 0] - np.sum(U * s[..., 1:4], axis=-1) - 0.5 * s[..., 4] * B
    return s


def moment_matrix(table: MomentTable) -> np.ndarray:
    """Dense (…, 5, 5) matrix M with M @ s = ⟨s ψ⟩."""
    eye = np.eye(5)
    cols = [slope_moments(table, "full", eye[j]) for j in range(5)]
    return np.stack(cols, axis=-1)


def solve_microslope_dense(eq: EquilibriumState, dW: np.ndarray) -> np.ndarray:
    """Reference solve of the same system by LU on the assembled moment matrix."""
    M = moment_matrix(moment_table(eq))
    b = np.asarray(dW, dtype=float) / np.asarray(eq.rho)[..., None]
    return np.linalg.solve(M, b[..., None])[..., 0]


def solve_time_slope(eq: EquilibriumState, slopes: np.ndarray,
                     table: Optional[MomentTable] = None) -> np.ndarray:
    """A from the compatibility condition ⟨A + Σ a_d u_d⟩ = 0; `slopes` is (…, 3, 5)."""
    table = table or moment_table(eq)
    drift = transport_moments(table, "full", slopes)
    return solve_microslope(eq, -np.asarray(eq.rho)[..., None] * drift)
