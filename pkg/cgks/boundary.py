"""
Ghost states for boundary faces, built pointwise in the face-local frame
"""
import logging
from dataclasses import dataclass
from typing import Optional

import numpy as np

from . import settings
from .errors import ConfigError
from .flux import face_frames, rotate_gradient, rotate_state, unrotate_gradient, unrotate_state
from .kinetic import conserved_to_primitive, primitive_to_conserved
from .mesh import Mesh
from .mesh_tools import PatchKind

logger = logging.getLogger("cgks.boundary")

# Reflection of (ρ, ρUn, ρUt1, ρUt2, ρE) across the face plane
_SLIP = np.array([1.0, -1.0, 1.0, 1.0, 1.0])
_NOSLIP = np.array([1.0, -1.0, -1.0, -1.0, 1.0])


@dataclass(frozen=True, eq=False)
class GhostState:
    W: np.ndarray   # (…, 5)
    G: np.ndarray   # (…, 3, 5)


def _mirror(W: np.ndarray, G: np.ndarray, parity: np.ndarray) -> GhostState:
    Wg = W * parity
    Gg = G * parity
    Gg[..., 0, :] *= -1.0
    return GhostState(Wg, Gg)


def _farfield(W: np.ndarray, G: np.ndarray, exterior: np.ndarray, gamma: float) -> GhostState:
    """Characteristic blend along the outward normal (first local axis)."""
    rho_i, U_i, p_i = conserved_to_primitive(W, gamma)
    rho_e, U_e, p_e = conserved_to_primitive(np.broadcast_to(exterior, W.shape), gamma)
    c_i = np.sqrt(gamma * p_i / rho_i)
    c_e = np.sqrt(gamma * p_e / rho_e)
    un_i = U_i[..., 0]
    un_e = U_e[..., 0]

    r_plus = un_i + 2.0 * c_i / (gamma - 1.0)
    r_minus = un_e - 2.0 * c_e / (gamma - 1.0)
    un = 0.5 * (r_plus + r_minus)
    c = 0.25 * (gamma - 1.0) * (r_plus - r_minus)
    outflow = un > 0.0
    entropy = np.where(outflow, p_i / rho_i ** gamma, p_e / rho_e ** gamma)
    tangential = np.where(outflow[..., None], U_i[..., 1:], U_e[..., 1:])
    rho = (c * c / (gamma * entropy)) ** (1.0 / (gamma - 1.0))
    p = rho * c * c / gamma
    U = np.concatenate([un[..., None], tangential], axis=-1)
    blended = primitive_to_conserved(rho, U, p, gamma)

    supersonic_in = un_i <= -c_i
    supersonic_out = un_i >= c_i
    Wg = np.where(supersonic_in[..., None], np.broadcast_to(exterior, W.shape),
                  np.where(supersonic_out[..., None], W, blended))
    return GhostState(Wg, np.array(G, dtype=float, copy=True))


def ghost_local(kind: str, W: np.ndarray, G: np.ndarray, exterior: Optional[np.ndarray] = None,
                gamma: float = settings.GAMMA, donor: Optional[GhostState] = None) -> GhostState:
    """Ghost value and gradient from local-frame interior data (first axis = outward normal)."""
    W = np.asarray(W, dtype=float)
    G = np.asarray(G, dtype=float)
    if kind == PatchKind.SLIP_WALL:
        return _mirror(W, G, _SLIP)
    if kind == PatchKind.NOSLIP_WALL:
        return _mirror(W, G, _NOSLIP)
    if kind == PatchKind.FARFIELD:
        if exterior is None:
            raise ValueError("far-field ghost needs a free-stream state")
        return _farfield(W, G, np.asarray(exterior, dtype=float), gamma)
    if kind == PatchKind.PERIODIC:
        if donor is None:
            raise ValueError("periodic ghost needs the donor cell state")
        return donor
    raise ValueError(f"unknown patch kind {kind!r}")


def ghost_state(kind: str, W: np.ndarray, G: np.ndarray, frame: np.ndarray,
                freestream: Optional[np.ndarray] = None, gamma: float = settings.GAMMA,
                donor: Optional[GhostState] = None) -> GhostState:
    """Global-frame ghost for interior value W (…, 5) and gradient G (…, 3, 5).

    `frame` holds the rows (n, t1, t2) with n pointing out of the domain. A periodic
    donor is a translated copy, so its value and gradient pass through unchanged.
    """
    if kind == PatchKind.PERIODIC:
        return ghost_local(kind, W, G, donor=donor)
    exterior = None if freestream is None else rotate_state(frame, np.broadcast_to(freestream, np.shape(W)))
    local = ghost_local(kind, rotate_state(frame, W), rotate_gradient(frame, G), exterior, gamma)
    return GhostState(unrotate_state(frame, local.W), unrotate_gradient(frame, local.G))


class BoundaryConditions:
    """Patch kinds of a mesh's remaining boundary faces, and the free stream they may need."""

    def __init__(self, mesh: Mesh, freestream: Optional[np.ndarray] = None, gamma: float = settings.GAMMA):
        self.mesh = mesh
        self.gamma = gamma
        self.freestream = None if freestream is None else np.asarray(freestream, dtype=float)
        used = np.unique(mesh.face_patch[mesh.face_patch >= 0])
        for p in used:
            patch = mesh.patches[p]
            if patch.kind is None:
                raise ConfigError(f"no boundary kind for patch '{patch.name}'", "boundary", patch.name)
            if patch.kind == PatchKind.PERIODIC:
                raise ConfigError(f"patch '{patch.name}' is periodic but has unpaired faces", "boundary", patch.name)
            if patch.kind == PatchKind.FARFIELD and self.freestream is None:
                raise ConfigError("far-field patch needs a [freestream] state", "freestream")
        self.kinds = tuple(p.kind for p in mesh.patches)
        self.face_frames = face_frames(mesh.face_normal)

    def ghost_points(self, faces: np.ndarray, W: np.ndarray, G: np.ndarray, frames: np.ndarray) -> GhostState:
        """Ghosts for local-frame interior data at points lying on boundary `faces`."""
        Wg = np.empty_like(W)
        Gg = np.empty_like(G)
        patch = self.mesh.face_patch[faces]
        for p in np.unique(patch):
            sel = np.flatnonzero(patch == p)
            exterior = None
            if self.freestream is not None:
                exterior = rotate_state(frames[sel], np.broadcast_to(self.freestream, (sel.size, 5)))
            ghost = ghost_local(self.kinds[p], W[sel], G[sel], exterior, self.gamma)
            Wg[sel] = ghost.W
            Gg[sel] = ghost.G
        return GhostState(Wg, Gg)

    def ghost_means(self, W: np.ndarray) -> np.ndarray:
        """(Nf, 5) ghost cell means across boundary faces (owner mean, no gradient); zero elsewhere."""
        mesh = self.mesh
        out = np.zeros((mesh.n_faces, 5))
        faces = mesh.boundary_faces
        if faces.size == 0:
            return out
        frames = self.face_frames[faces]
        Wl = rotate_state(frames, W[mesh.face_owner[faces]])
        ghost = self.ghost_points(faces, Wl, np.zeros(Wl.shape[:-1] + (3, 5)), frames)
        out[faces] = unrotate_state(frames, ghost.W)
        return out
