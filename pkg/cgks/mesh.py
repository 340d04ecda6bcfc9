"""
Unstructured hybrid mesh: topology, geometry, face quadrature and basis moments.

Every reconstruction operator in the solver works from the arrays held by `Mesh`:
cell volumes and volume centroids, the nine basis moments of each cell, the
von Neumann neighbours (with the translation used to see a periodic image), and
the flattened list of face quadrature points.
"""
import logging
from dataclasses import dataclass
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from .errors import MeshError

logger = logging.getLogger("cgks.mesh")

TET, PYRAMID, PRISM, HEX = 0, 1, 2, 3
KIND_NAMES = ("tetrahedron", "pyramid", "prism", "hexahedron")
NODES_PER_KIND = (4, 5, 6, 8)
FACES_PER_KIND = (4, 5, 5, 6)
MAX_CELL_NODES = 8
MAX_CELL_FACES = 6

# Local faces; node order makes the right-hand normal point out of the cell
FACE_TEMPLATES = {
    TET: ((0, 2, 1), (0, 1, 3), (1, 2, 3), (0, 3, 2)),
    PYRAMID: ((0, 3, 2, 1), (0, 1, 4), (1, 2, 4), (2, 3, 4), (3, 0, 4)),
    PRISM: ((0, 2, 1), (3, 4, 5), (0, 1, 4, 3), (1, 2, 5, 4), (2, 0, 3, 5)),
    HEX: ((0, 3, 2, 1), (4, 5, 6, 7), (0, 1, 5, 4), (1, 2, 6, 5), (2, 3, 7, 6), (3, 0, 4, 7)),
}

# Monomial exponents of the nine non-constant basis functions, in coefficient order a1..a9
MONOMIALS = ((1, 0, 0), (0, 1, 0), (0, 0, 1),
             (2, 0, 0), (0, 2, 0), (0, 0, 2),
             (1, 1, 0), (0, 1, 1), (1, 0, 1))

# Second-moment index pairs for the quadratic monomials a4..a9
QUADRATIC_PAIRS = ((0, 0), (1, 1), (2, 2), (0, 1), (1, 2), (0, 2))

_G = 0.5 / np.sqrt(3.0)
TRI_BARYCENTRIC = np.array([[2.0 / 3.0, 1.0 / 6.0, 1.0 / 6.0],
                            [1.0 / 6.0, 2.0 / 3.0, 1.0 / 6.0],
                            [1.0 / 6.0, 1.0 / 6.0, 2.0 / 3.0]])
QUAD_REFERENCE = np.array([[0.5 - _G, 0.5 - _G],
                           [0.5 + _G, 0.5 - _G],
                           [0.5 + _G, 0.5 + _G],
                           [0.5 - _G, 0.5 + _G]])


def _face_triangles(face: Sequence[int]) -> List[Tuple[int, int, int]]:
    if len(face) == 3:
        return [tuple(face)]
    a, b, c, d = face
    return [(a, b, c), (a, c, d)]


# Outward triangles of each element, used for volume and moment decomposition
TRIANGLE_TEMPLATES = {
    kind: tuple(tri for face in faces for tri in _face_triangles(face))
    for kind, faces in FACE_TEMPLATES.items()
}


@dataclass(frozen=True)
class Patch:
    name: str
    kind: Optional[str] = None


@dataclass(frozen=True)
class PeriodicPair:
    face: int
    partner_centroid: Tuple[float, float, float]
    shift: Tuple[float, float, float]
    axis: str
    low_patch: str
    high_patch: str


@dataclass(frozen=True, eq=False)
class RawMesh:
    """Connectivity and node positions before any geometry is computed."""
    nodes: np.ndarray            # (Nn, 3)
    cell_kind: np.ndarray        # (Nc,)
    cell_nodes: np.ndarray       # (Nc, 8), -1 padded
    boundary_nodes: np.ndarray   # (Nb, 4), -1 padded for triangles
    boundary_patch: np.ndarray   # (Nb,) index into patches
    patches: Tuple[Patch, ...] = ()


@dataclass(frozen=True, eq=False)
class Mesh:
    nodes: np.ndarray
    cell_kind: np.ndarray
    cell_nodes: np.ndarray
    # cells
    cell_volume: np.ndarray          # (Nc,)
    cell_centroid: np.ndarray        # (Nc, 3)
    cell_moments: np.ndarray         # (Nc, 9) M_k in MONOMIALS order
    cell_faces: np.ndarray           # (Nc, 6) face ids, -1 padded
    cell_face_sign: np.ndarray       # (Nc, 6) +1 owner side, -1 neighbour side
    cell_neighbors: np.ndarray       # (Nc, 6) neighbour ids, -1 for boundary or padding
    cell_neighbor_shift: np.ndarray  # (Nc, 6, 3) image translation of the neighbour
    cell_num_faces: np.ndarray       # (Nc,)
    # faces
    face_nodes: np.ndarray           # (Nf, 4), -1 padded
    face_owner: np.ndarray
    face_owner_local: np.ndarray
    face_neighbor: np.ndarray        # -1 on boundary faces
    face_neighbor_local: np.ndarray
    face_patch: np.ndarray           # -1 on interior faces
    face_shift: np.ndarray           # (Nf, 3) neighbour seen across the face = neighbour + shift
    face_area: np.ndarray
    face_normal: np.ndarray          # unit, outward from the owner
    face_centroid: np.ndarray
    # face quadrature, flattened in face order
    point_face: np.ndarray           # (P,)
    point_xyz: np.ndarray            # (P, 3)
    point_weight: np.ndarray         # (P,) sums to one on every face
    face_point_start: np.ndarray     # (Nf + 1,)
    patches: Tuple[Patch, ...] = ()
    periodic_pairs: Tuple[PeriodicPair, ...] = ()

    @property
    def n_cells(self) -> int:
        return int(self.cell_volume.shape[0])

    @property
    def n_faces(self) -> int:
        return int(self.face_area.shape[0])

    @property
    def n_points(self) -> int:
        return int(self.point_weight.shape[0])

    @property
    def bounding_box(self) -> np.ndarray:
        return np.stack([self.nodes.min(axis=0), self.nodes.max(axis=0)])

    @property
    def cell_is_interior(self) -> np.ndarray:
        """Cells whose von Neumann neighbours all exist (periodic images included)."""
        slots = np.arange(MAX_CELL_FACES)[None, :] < self.cell_num_faces[:, None]
        return np.all((self.cell_neighbors >= 0) | ~slots, axis=1)

    @property
    def boundary_faces(self) -> np.ndarray:
        return np.flatnonzero(self.face_neighbor < 0)

    def patch_index(self, name: str) -> int:
        for i, patch in enumerate(self.patches):
            if patch.name == name:
                return i
        raise MeshError(f"no boundary patch named {name!r}")

    def with_patch_kinds(self, kinds: Dict[str, str]) -> "Mesh":
        patches = tuple(Patch(p.name, kinds.get(p.name, p.kind)) for p in self.patches)
        return _replace(self, patches=patches)

    def merge_periodic(self, low: np.ndarray, high: np.ndarray, shift: np.ndarray,
                       axis: str, low_patch: str, high_patch: str) -> "Mesh":
        """Join boundary faces `low[i]` and `high[i]` into one interior face.

        The surviving face is `low[i]`; its neighbour is the owner of `high[i]`, seen
        translated by `shift[i]` (so points on `low[i]` map into the neighbour's own
        coordinates by subtracting the shift).
        """
        low = np.asarray(low, dtype=np.int64)
        high = np.asarray(high, dtype=np.int64)
        shift = np.asarray(shift, dtype=float).reshape(-1, 3)
        face_neighbor = self.face_neighbor.copy()
        face_neighbor_local = self.face_neighbor_local.copy()
        face_patch = self.face_patch.copy()
        face_shift = self.face_shift.copy()
        face_neighbor[low] = self.face_owner[high]
        face_neighbor_local[low] = self.face_owner_local[high]
        face_patch[low] = -1
        face_shift[low] = shift

        keep = np.ones(self.n_faces, dtype=bool)
        keep[high] = False
        renumber = np.cumsum(keep) - 1
        pairs = tuple(
            PeriodicPair(int(renumber[lo]), tuple(float(v) for v in self.face_centroid[hi]),
                         tuple(float(v) for v in sh), axis, low_patch, high_patch)
            for lo, hi, sh in zip(low, high, shift)
        )
        old_pairs = tuple(
            PeriodicPair(int(renumber[p.face]), p.partner_centroid, p.shift, p.axis,
                         p.low_patch, p.high_patch)
            for p in self.periodic_pairs
        )
        faces = dict(
            face_nodes=self.face_nodes[keep],
            face_owner=self.face_owner[keep],
            face_owner_local=self.face_owner_local[keep],
            face_neighbor=face_neighbor[keep],
            face_neighbor_local=face_neighbor_local[keep],
            face_patch=face_patch[keep],
            face_shift=face_shift[keep],
            face_area=self.face_area[keep],
            face_normal=self.face_normal[keep],
            face_centroid=self.face_centroid[keep],
        )
        point_keep = keep[self.point_face]
        points = dict(
            point_face=renumber[self.point_face[point_keep]],
            point_xyz=self.point_xyz[point_keep],
            point_weight=self.point_weight[point_keep],
        )
        cells = dict(
            cell_volume=self.cell_volume,
            cell_centroid=self.cell_centroid,
            cell_moments=self.cell_moments,
        )
        return _make_mesh(self.nodes, self.cell_kind, self.cell_nodes, cells, faces, points,
                          self.patches, old_pairs + pairs)


def _replace(mesh: Mesh, **changes) -> Mesh:
    fields = {name: getattr(mesh, name) for name in Mesh.__dataclass_fields__}
    fields.update(changes)
    return Mesh(**fields)


def _freeze(*arrays: np.ndarray) -> None:
    for a in arrays:
        a.setflags(write=False)


# =============================================================================
# GEOMETRY KERNELS
# =============================================================================

def face_vector_areas(nodes: np.ndarray, face_nodes: np.ndarray) -> np.ndarray:
    """Vector area of triangles and (possibly non-planar) quadrilaterals.

    A quadrilateral (a, b, c, d) gets ½(c - a) × (d - b), which is the sum of its
    two triangles (a, b, c) and (a, c, d).
    """
    a = nodes[face_nodes[:, 0]]
    b = nodes[face_nodes[:, 1]]
    c = nodes[face_nodes[:, 2]]
    is_quad = face_nodes[:, 3] >= 0
    tri = 0.5 * np.cross(b - a, c - a)
    d = nodes[np.where(is_quad, face_nodes[:, 3], face_nodes[:, 0])]
    quad = 0.5 * np.cross(c - a, d - b)
    return np.where(is_quad[:, None], quad, tri)


def face_quadrature(nodes: np.ndarray, face_nodes: np.ndarray):
    """Gauss points of each face: 3-point degree-2 triangle rule, 2x2 tensor rule on quads.

    Quadrilateral weights are the bilinear-patch Jacobians at the Gauss points,
    normalised to sum to one.
    Returns (points (Nf, 4, 3), weights (Nf, 4)); triangles carry a zero fourth weight.
    """
    nf = face_nodes.shape[0]
    is_quad = face_nodes[:, 3] >= 0
    x0 = nodes[face_nodes[:, 0]]
    x1 = nodes[face_nodes[:, 1]]
    x2 = nodes[face_nodes[:, 2]]
    x3 = nodes[np.where(is_quad, face_nodes[:, 3], face_nodes[:, 0])]

    points = np.zeros((nf, 4, 3))
    weights = np.zeros((nf, 4))

    tri_pts = np.einsum("kj,fjd->fkd", TRI_BARYCENTRIC, np.stack([x0, x1, x2], axis=1))
    points[:, :3] = tri_pts
    points[:, 3] = tri_pts[:, 0]
    weights[:, :3] = 1.0 / 3.0

    if np.any(is_quad):
        q = np.flatnonzero(is_quad)
        xi = QUAD_REFERENCE[:, 0][None, :, None]
        eta = QUAD_REFERENCE[:, 1][None, :, None]
        q0, q1, q2, q3 = (x[q][:, None, :] for x in (x0, x1, x2, x3))
        quad_pts = ((1 - xi) * (1 - eta) * q0 + xi * (1 - eta) * q1
                    + xi * eta * q2 + (1 - xi) * eta * q3)
        d_xi = (1 - eta) * (q1 - q0) + eta * (q2 - q3)
        d_eta = (1 - xi) * (q3 - q0) + xi * (q2 - q1)
        jac = np.linalg.norm(np.cross(d_xi, d_eta), axis=-1)
        points[q] = quad_pts
        weights[q] = jac / jac.sum(axis=1, keepdims=True)
    return points, weights


def _cell_triangles(nodes: np.ndarray, cell_kind: np.ndarray, cell_nodes: np.ndarray):
    """Yield (cell ids, outward triangle vertices (n, ntri, 3, 3)) per element kind."""
    for kind, tris in TRIANGLE_TEMPLATES.items():
        ids = np.flatnonzero(cell_kind == kind)
        if ids.size == 0:
            continue
        local = np.asarray(tris)
        verts = nodes[cell_nodes[ids][:, local]]
        yield kind, ids, verts


def _tet_second_moment(vol: np.ndarray, rel: np.ndarray) -> np.ndarray:
    """Exact ∫ y yᵀ over tetrahedra whose vertices `rel` (…, 4, 3) are relative to the origin."""
    s = rel.sum(axis=-2)
    outer = np.einsum("...ai,...aj->...ij", rel, rel) + np.einsum("...i,...j->...ij", s, s)
    return vol[..., None, None] / 20.0 * outer


def cell_geometry(nodes: np.ndarray, cell_kind: np.ndarray, cell_nodes: np.ndarray):
    """Volumes, volume centroids and basis moments by tetrahedral decomposition."""
    nc = cell_kind.shape[0]
    volume = np.zeros(nc)
    centroid = np.zeros((nc, 3))
    moments = np.zeros((nc, 9))
    for kind, ids, tri in _cell_triangles(nodes, cell_kind, cell_nodes):
        nn = NODES_PER_KIND[kind]
        ref = nodes[cell_nodes[ids, :nn]].mean(axis=1)
        rel = tri - ref[:, None, None, :]
        tet_vol = np.einsum("nti,nti->nt", rel[:, :, 0], np.cross(rel[:, :, 1], rel[:, :, 2])) / 6.0
        vol = tet_vol.sum(axis=1)
        bad = np.flatnonzero(vol <= 0.0)
        if bad.size:
            raise MeshError("non-positive cell volume", cell=int(ids[bad[0]]))
        tet_centroid = (ref[:, None, :] + tri.sum(axis=2)) / 4.0
        cen = np.einsum("nt,ntd->nd", tet_vol, tet_centroid) / vol[:, None]

        # Re-decompose from the volume centroid for the moments
        rel0 = tri - cen[:, None, None, :]
        sub_vol = np.einsum("nti,nti->nt", rel0[:, :, 0], np.cross(rel0[:, :, 1], rel0[:, :, 2])) / 6.0
        bad = np.flatnonzero(np.any(sub_vol <= 0.0, axis=1))
        if bad.size:
            raise MeshError("degenerate tetrahedron in cell decomposition", cell=int(ids[bad[0]]))
        apex = np.zeros(rel0.shape[:2] + (1, 3))
        tets = np.concatenate([apex, rel0], axis=2)
        first = np.einsum("nt,ntd->nd", sub_vol, tets.sum(axis=2) / 4.0)
        second = _tet_second_moment(sub_vol, tets).sum(axis=1)

        v = sub_vol.sum(axis=1)
        volume[ids] = v
        centroid[ids] = cen
        moments[ids, :3] = first / v[:, None]
        for j, (p, q) in enumerate(QUADRATIC_PAIRS):
            moments[ids, 3 + j] = second[:, p, q] / v
    return volume, centroid, moments


def second_moment_matrix(moments: np.ndarray) -> np.ndarray:
    """(…, 9) moments -> (…, 3, 3) symmetric matrix of mean(Δx_i Δx_j)."""
    m = np.empty(moments.shape[:-1] + (3, 3))
    for j, (p, q) in enumerate(QUADRATIC_PAIRS):
        m[..., p, q] = moments[..., 3 + j]
        m[..., q, p] = moments[..., 3 + j]
    return m


def cell_quadrature(mesh: Mesh, n_points: Tuple[int, int, int] = (4, 3, 3)):
    """Collapsed Gauss rule on the centroid tetrahedra of each cell.

    The default (4, 3, 3) rule integrates polynomials of total degree 4 exactly.
    Returns points (Nc, Q, 3) and absolute weights (Nc, Q); padded entries have zero weight.
    """
    ref_pts, ref_w = _collapsed_tet_rule(*n_points)
    nq_tet = ref_w.size
    max_tris = max(len(t) for t in TRIANGLE_TEMPLATES.values())
    nc = mesh.n_cells
    points = np.repeat(mesh.cell_centroid[:, None, :], max_tris * nq_tet, axis=1)
    weights = np.zeros((nc, max_tris * nq_tet))
    for kind, ids, tri in _cell_triangles(mesh.nodes, mesh.cell_kind, mesh.cell_nodes):
        x0 = mesh.cell_centroid[ids][:, None, :]
        e1 = tri[:, :, 0] - x0
        e2 = tri[:, :, 1] - x0
        e3 = tri[:, :, 2] - x0
        det = np.einsum("nti,nti->nt", e1, np.cross(e2, e3))
        pts = (x0[:, :, None, :]
               + ref_pts[None, None, :, 0, None] * e1[:, :, None, :]
               + ref_pts[None, None, :, 1, None] * e2[:, :, None, :]
               + ref_pts[None, None, :, 2, None] * e3[:, :, None, :])
        w = np.abs(det)[:, :, None] * ref_w[None, None, :]
        ntri = tri.shape[1]
        points[ids, :ntri * nq_tet] = pts.reshape(ids.size, -1, 3)
        weights[ids, :ntri * nq_tet] = w.reshape(ids.size, -1)
    return points, weights


def _collapsed_tet_rule(nu: int, nv: int, nw: int):
    """Duffy-collapsed Gauss-Legendre rule on the unit tetrahedron (weights sum to 1/6)."""
    def gl(n):
        x, w = np.polynomial.legendre.leggauss(n)
        return 0.5 * (x + 1.0), 0.5 * w

    u, wu = gl(nu)
    v, wv = gl(nv)
    w_, ww = gl(nw)
    U, V, W = np.meshgrid(u, v, w_, indexing="ij")
    WU, WV, WW = np.meshgrid(wu, wv, ww, indexing="ij")
    x = U
    y = V * (1.0 - U)
    z = W * (1.0 - U) * (1.0 - V)
    jac = (1.0 - U) ** 2 * (1.0 - V)
    pts = np.stack([x.ravel(), y.ravel(), z.ravel()], axis=1)
    return pts, (WU * WV * WW * jac).ravel()


# =============================================================================
# TOPOLOGY
# =============================================================================

def _half_faces(cell_kind: np.ndarray, cell_nodes: np.ndarray):
    cells, locals_, nodes = [], [], []
    for kind, faces in FACE_TEMPLATES.items():
        ids = np.flatnonzero(cell_kind == kind)
        if ids.size == 0:
            continue
        for local, face in enumerate(faces):
            fn = np.full((ids.size, 4), -1, dtype=np.int64)
            fn[:, :len(face)] = cell_nodes[ids][:, list(face)]
            cells.append(ids)
            locals_.append(np.full(ids.size, local, dtype=np.int64))
            nodes.append(fn)
    hf_cell = np.concatenate(cells)
    hf_local = np.concatenate(locals_)
    hf_nodes = np.concatenate(nodes)
    order = np.lexsort((hf_local, hf_cell))
    return hf_cell[order], hf_local[order], hf_nodes[order]


def _face_topology(raw: RawMesh):
    hf_cell, hf_local, hf_nodes = _half_faces(raw.cell_kind, raw.cell_nodes)
    keys = np.sort(hf_nodes, axis=1)
    uniq, inverse, counts = np.unique(keys, axis=0, return_inverse=True, return_counts=True)
    inverse = inverse.reshape(-1)
    if np.any(counts > 2):
        g = int(np.flatnonzero(counts > 2)[0])
        raise MeshError(f"face {tuple(int(n) for n in uniq[g] if n >= 0)} shared by {counts[g]} cells")

    nhf = hf_cell.size
    first = np.full(uniq.shape[0], nhf, dtype=np.int64)
    np.minimum.at(first, inverse, np.arange(nhf))
    second = np.full(uniq.shape[0], -1, dtype=np.int64)
    others = np.flatnonzero(first[inverse] != np.arange(nhf))
    second[inverse[others]] = others

    order = np.argsort(first, kind="stable")
    owner_hf = first[order]
    neighbor_hf = second[order]
    interior = neighbor_hf >= 0

    face_nodes = hf_nodes[owner_hf]
    face_owner = hf_cell[owner_hf]
    face_owner_local = hf_local[owner_hf]
    face_neighbor = np.where(interior, hf_cell[np.maximum(neighbor_hf, 0)], -1)
    face_neighbor_local = np.where(interior, hf_local[np.maximum(neighbor_hf, 0)], -1)

    # Consistent orientation: the neighbour must see the face reversed
    owner_area = face_vector_areas(raw.nodes, face_nodes[interior])
    nb_area = face_vector_areas(raw.nodes, hf_nodes[neighbor_hf[interior]])
    inverted = np.flatnonzero(np.einsum("fi,fi->f", owner_area, nb_area) >= 0.0)
    if inverted.size:
        f = int(np.flatnonzero(interior)[inverted[0]])
        raise MeshError("inverted face orientation", face=f, cell=int(face_neighbor[f]))

    face_patch = np.full(face_owner.size, -1, dtype=np.int64)
    patches = list(raw.patches)
    boundary = np.flatnonzero(~interior)
    if boundary.size:
        lookup = {tuple(k): int(p) for k, p in zip(np.sort(raw.boundary_nodes, axis=1), raw.boundary_patch)}
        bkeys = np.sort(face_nodes[boundary], axis=1)
        unassigned = None
        for f, key in zip(boundary, map(tuple, bkeys)):
            patch = lookup.pop(key, None)
            if patch is None:
                if unassigned is None:
                    patches.append(Patch("unassigned"))
                    unassigned = len(patches) - 1
                patch = unassigned
            face_patch[f] = patch
        if lookup:
            key = next(iter(lookup))
            raise MeshError(f"boundary element {tuple(n for n in key if n >= 0)} is not a cell face")
        if unassigned is not None:
            logger.warning(f"{int(np.sum(face_patch == unassigned))} boundary faces carry no patch tag")

    return dict(
        face_nodes=face_nodes,
        face_owner=face_owner,
        face_owner_local=face_owner_local,
        face_neighbor=face_neighbor,
        face_neighbor_local=face_neighbor_local,
        face_patch=face_patch,
        face_shift=np.zeros((face_owner.size, 3)),
    ), tuple(patches)


def _make_mesh(nodes, cell_kind, cell_nodes, cells: dict, faces: dict, points: dict,
               patches, periodic_pairs) -> Mesh:
    nc = cell_kind.shape[0]
    nf = faces["face_owner"].shape[0]
    cell_faces = np.full((nc, MAX_CELL_FACES), -1, dtype=np.int64)
    cell_face_sign = np.zeros((nc, MAX_CELL_FACES))
    cell_neighbors = np.full((nc, MAX_CELL_FACES), -1, dtype=np.int64)
    cell_neighbor_shift = np.zeros((nc, MAX_CELL_FACES, 3))

    fid = np.arange(nf)
    owner, olocal = faces["face_owner"], faces["face_owner_local"]
    nb, nlocal = faces["face_neighbor"], faces["face_neighbor_local"]
    shift = faces["face_shift"]
    cell_faces[owner, olocal] = fid
    cell_face_sign[owner, olocal] = 1.0
    cell_neighbors[owner, olocal] = nb
    cell_neighbor_shift[owner, olocal] = shift
    inner = nb >= 0
    cell_faces[nb[inner], nlocal[inner]] = fid[inner]
    cell_face_sign[nb[inner], nlocal[inner]] = -1.0
    cell_neighbors[nb[inner], nlocal[inner]] = owner[inner]
    cell_neighbor_shift[nb[inner], nlocal[inner]] = -shift[inner]

    counts = np.bincount(points["point_face"], minlength=nf)
    start = np.concatenate([[0], np.cumsum(counts)])
    mesh = Mesh(
        nodes=nodes,
        cell_kind=cell_kind,
        cell_nodes=cell_nodes,
        cell_faces=cell_faces,
        cell_face_sign=cell_face_sign,
        cell_neighbors=cell_neighbors,
        cell_neighbor_shift=cell_neighbor_shift,
        cell_num_faces=np.asarray(FACES_PER_KIND)[cell_kind],
        face_point_start=start,
        patches=tuple(patches),
        periodic_pairs=tuple(periodic_pairs),
        **cells, **faces, **points,
    )
    _freeze(*(getattr(mesh, name) for name in Mesh.__dataclass_fields__
              if isinstance(getattr(mesh, name), np.ndarray)))
    return mesh


def compute_geometry(raw: RawMesh) -> Mesh:
    """Build the immutable mesh: faces, geometry, quadrature and basis moments."""
    nodes = np.asarray(raw.nodes, dtype=float)
    if not np.all(np.isfinite(nodes)):
        raise MeshError("non-finite node coordinates")
    cell_kind = np.asarray(raw.cell_kind, dtype=np.int64)
    cell_nodes = np.asarray(raw.cell_nodes, dtype=np.int64)
    for kind in range(4):
        ids = np.flatnonzero(cell_kind == kind)
        used = cell_nodes[ids, :NODES_PER_KIND[kind]]
        bad = np.flatnonzero(np.any((used < 0) | (used >= nodes.shape[0]), axis=1))
        if bad.size:
            raise MeshError("cell references a missing node", cell=int(ids[bad[0]]))

    volume, centroid, moments = cell_geometry(nodes, cell_kind, cell_nodes)
    raw = RawMesh(nodes, cell_kind, cell_nodes, np.asarray(raw.boundary_nodes, dtype=np.int64).reshape(-1, 4),
                  np.asarray(raw.boundary_patch, dtype=np.int64), tuple(raw.patches))
    faces, patches = _face_topology(raw)

    area_vec = face_vector_areas(nodes, faces["face_nodes"])
    area = np.linalg.norm(area_vec, axis=1)
    if np.any(area <= 0.0):
        raise MeshError("degenerate face", face=int(np.flatnonzero(area <= 0.0)[0]))
    qp, qw = face_quadrature(nodes, faces["face_nodes"])
    faces.update(
        face_area=area,
        face_normal=area_vec / area[:, None],
        face_centroid=np.einsum("fk,fkd->fd", qw, qp),
    )
    active = qw > 0.0
    fidx = np.broadcast_to(np.arange(area.size)[:, None], qw.shape)
    points = dict(point_face=fidx[active], point_xyz=qp[active], point_weight=qw[active])
    cells = dict(cell_volume=volume, cell_centroid=centroid, cell_moments=moments)
    mesh = _make_mesh(nodes, cell_kind, cell_nodes, cells, faces, points, patches, ())
    logger.info(f"Mesh built: {mesh.n_cells} cells, {mesh.n_faces} faces, "
                f"{mesh.boundary_faces.size} boundary faces")
    return mesh


# =============================================================================
# BASIS INTEGRALS
# =============================================================================

def cell_basis_moments(mesh: Mesh, cell: int) -> np.ndarray:
    """The nine moments M_k = (1/|Ω|)∭ Δx^k dV of one cell, |k| = 1, 2."""
    return np.array(mesh.cell_moments[cell])


def _shifted_monomial_means(moments_m: np.ndarray, offset: np.ndarray) -> np.ndarray:
    """Means over Ω_m of the plain monomials in (x - x0), where offset = x_m - x0."""
    m1 = moments_m[..., :3]
    out = np.empty(offset.shape[:-1] + (9,))
    out[..., :3] = offset + m1
    for j, (p, q) in enumerate(QUADRATIC_PAIRS):
        out[..., 3 + j] = (moments_m[..., 3 + j] + offset[..., p] * offset[..., q]
                           + offset[..., p] * m1[..., q] + offset[..., q] * m1[..., p])
    return out


def neighbor_basis_integrals(mesh: Mesh, cell: int, neighbor: int,
                             shift: Sequence[float] = (0.0, 0.0, 0.0)) -> np.ndarray:
    """∭_{Ω_m} (x - x0)^k dV for the nine monomials of cell `cell`, over `neighbor`.

    `shift` translates the neighbour (periodic image). Exact for quadratic monomials.
    """
    offset = mesh.cell_centroid[neighbor] + np.asarray(shift, dtype=float) - mesh.cell_centroid[cell]
    return mesh.cell_volume[neighbor] * _shifted_monomial_means(mesh.cell_moments[neighbor], offset)


def stencil_offsets(mesh: Mesh) -> np.ndarray:
    """Centroid offsets δ_m = x_m(+shift) - x0 for every neighbour slot, zero where absent."""
    nb = mesh.cell_neighbors
    valid = nb >= 0
    off = mesh.cell_centroid[np.maximum(nb, 0)] + mesh.cell_neighbor_shift - mesh.cell_centroid[:, None, :]
    return np.where(valid[..., None], off, 0.0)


def stencil_basis_means(mesh: Mesh) -> np.ndarray:
    """(Nc, 6, 9) means over each neighbour of the zero-mean basis of the centre cell.

    Built on demand from the stored moments and centroids; nothing here is persisted.
    """
    nb = mesh.cell_neighbors
    valid = nb >= 0
    offset = stencil_offsets(mesh)
    means = _shifted_monomial_means(mesh.cell_moments[np.maximum(nb, 0)], offset)
    means[..., 3:] -= mesh.cell_moments[:, None, 3:]
    return np.where(valid[..., None], means, 0.0)


def closure_residual(mesh: Mesh) -> np.ndarray:
    """Σ_faces sign·S·n for every cell; zero for a closed surface."""
    faces = np.maximum(mesh.cell_faces, 0)
    vec = mesh.face_area[faces, None] * mesh.face_normal[faces] * mesh.cell_face_sign[..., None]
    return vec.sum(axis=1)


def cell_surface_area(mesh: Mesh) -> np.ndarray:
    faces = np.maximum(mesh.cell_faces, 0)
    return np.sum(np.where(mesh.cell_faces >= 0, mesh.face_area[faces], 0.0), axis=1)
