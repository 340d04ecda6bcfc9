"""
Mesh generation, file ingestion and periodic pairing.

Box meshes come in three styles: hexahedra, the 6-tetrahedron Kuhn split of each
hexahedron, and a hybrid checkerboard of prism and pyramid columns. Files are read
from the ASCII MSH 2.2 subset or from the native "cgksmesh 1" text format.
"""
import itertools
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Sequence, Tuple, Union

import numpy as np
from scipy.spatial import cKDTree

from . import settings
from .errors import MeshError, UnmatchedPeriodicFaceError, UnsupportedElementError
from .mesh import (FACE_TEMPLATES, HEX, KIND_NAMES, MAX_CELL_NODES, NODES_PER_KIND, PRISM,
                   PYRAMID, TET, Mesh, Patch, RawMesh, _half_faces, compute_geometry)

logger = logging.getLogger("cgks.mesh_tools")

AXES = ("x", "y", "z")
BOX_STYLES = ("hex", "tet6", "hybrid")


class PatchKind:
    PERIODIC = "periodic"
    FARFIELD = "farfield_riemann"
    SLIP_WALL = "slip_wall"
    NOSLIP_WALL = "noslip_adiabatic_wall"

    ALL = (PERIODIC, FARFIELD, SLIP_WALL, NOSLIP_WALL)


@dataclass(frozen=True)
class BoxSpec:
    lower: Tuple[float, float, float] = (0.0, 0.0, 0.0)
    upper: Tuple[float, float, float] = (2.0, 2.0, 2.0)
    cells: Union[int, Tuple[int, int, int]] = 10
    style: str = "hex"
    periodic: Tuple[str, ...] = AXES

    def __post_init__(self):
        cells = self.cells
        if isinstance(cells, (int, np.integer)):
            cells = (int(cells),) * 3
        object.__setattr__(self, "cells", tuple(int(n) for n in cells))
        object.__setattr__(self, "lower", tuple(float(v) for v in self.lower))
        object.__setattr__(self, "upper", tuple(float(v) for v in self.upper))
        if len(self.cells) != 3 or min(self.cells) < 2:
            raise MeshError(f"box needs at least 2 cells per axis, got {self.cells}")
        if any(u <= l for l, u in zip(self.lower, self.upper)):
            raise MeshError(f"box upper corner {self.upper} must exceed lower {self.lower}")
        if self.style not in BOX_STYLES:
            raise MeshError(f"unknown box style {self.style!r}")
        if any(a not in AXES for a in self.periodic):
            raise MeshError(f"unknown periodic axes {self.periodic}")

    @property
    def extent(self) -> np.ndarray:
        return np.subtract(self.upper, self.lower)

    @property
    def volume(self) -> float:
        return float(np.prod(self.extent))


# Hexahedron corner index for each (bx, by, bz) corner bit pattern
_HEX_CORNER = {(0, 0, 0): 0, (1, 0, 0): 1, (1, 1, 0): 2, (0, 1, 0): 3,
               (0, 0, 1): 4, (1, 0, 1): 5, (1, 1, 1): 6, (0, 1, 1): 7}


def _kuhn_tets() -> List[Tuple[int, int, int, int]]:
    tets = []
    for perm in itertools.permutations(range(3)):
        bits = [0, 0, 0]
        path = [_HEX_CORNER[tuple(bits)]]
        for axis in perm:
            bits[axis] = 1
            path.append(_HEX_CORNER[tuple(bits)])
        # Odd permutations give negative volume; swap two vertices
        sign = np.linalg.det(np.eye(3)[list(perm)])
        if sign < 0:
            path[1], path[2] = path[2], path[1]
        tets.append(tuple(path))
    return tets


KUHN_TETS = _kuhn_tets()
PRISM_SPLIT = ((0, 1, 2, 4, 5, 6), (0, 2, 3, 4, 6, 7))


def _box_nodes(spec: BoxSpec) -> np.ndarray:
    nx, ny, nz = spec.cells
    axes = [np.linspace(l, u, n + 1) for l, u, n in zip(spec.lower, spec.upper, spec.cells)]
    z, y, x = np.meshgrid(axes[2], axes[1], axes[0], indexing="ij")
    return np.stack([x.ravel(), y.ravel(), z.ravel()], axis=1)


def _box_hexes(spec: BoxSpec):
    """(nx·ny·nz, 8) hexahedron connectivity, x fastest, gmsh corner order."""
    nx, ny, nz = spec.cells
    k, j, i = np.meshgrid(np.arange(nz), np.arange(ny), np.arange(nx), indexing="ij")
    i, j, k = i.ravel(), j.ravel(), k.ravel()

    def nid(di, dj, dk):
        return (i + di) + (nx + 1) * ((j + dj) + (ny + 1) * (k + dk))

    return np.stack([nid(0, 0, 0), nid(1, 0, 0), nid(1, 1, 0), nid(0, 1, 0),
                     nid(0, 0, 1), nid(1, 0, 1), nid(1, 1, 1), nid(0, 1, 1)], axis=1), (i, j, k)


def _pad(conn: np.ndarray) -> np.ndarray:
    out = np.full((conn.shape[0], MAX_CELL_NODES), -1, dtype=np.int64)
    out[:, :conn.shape[1]] = conn
    return out


def _box_boundary(nodes: np.ndarray, cell_kind: np.ndarray, cell_nodes: np.ndarray,
                  lower: Sequence[float], upper: Sequence[float]):
    """Tag every cell face lying on a box plane with its patch."""
    _, _, hf_nodes = _half_faces(cell_kind, cell_nodes)
    valid = hf_nodes >= 0
    coords = nodes[np.maximum(hf_nodes, 0)]
    scale = np.max(np.subtract(upper, lower))
    tol = 1e-12 * scale
    faces, tags, names = [], [], []
    for a, axis in enumerate(AXES):
        for side, plane in (("min", lower[a]), ("max", upper[a])):
            on = np.all((np.abs(coords[..., a] - plane) <= tol) | ~valid, axis=1)
            faces.append(hf_nodes[on])
            tags.append(np.full(int(on.sum()), len(names), dtype=np.int64))
            names.append(f"{axis}{side}")
    return np.concatenate(faces), np.concatenate(tags), tuple(Patch(n) for n in names)


def box_raw(spec: BoxSpec) -> RawMesh:
    """Connectivity of a box mesh before geometry and periodic pairing."""
    nodes = _box_nodes(spec)
    hexes, (i, j, k) = _box_hexes(spec)
    if spec.style == "hex":
        cell_kind = np.full(hexes.shape[0], HEX, dtype=np.int64)
        cell_nodes = _pad(hexes)
    elif spec.style == "tet6":
        tets = hexes[:, np.asarray(KUHN_TETS)].reshape(-1, 4)
        cell_kind = np.full(tets.shape[0], TET, dtype=np.int64)
        cell_nodes = _pad(tets)
    else:
        prism_col = (i + j) % 2 == 0
        prisms = hexes[prism_col][:, np.asarray(PRISM_SPLIT)].reshape(-1, 6)
        pyr_hex = hexes[~prism_col]
        centers = nodes[pyr_hex].mean(axis=1)
        center_id = nodes.shape[0] + np.arange(pyr_hex.shape[0])
        nodes = np.concatenate([nodes, centers])
        pyramids = []
        for face in FACE_TEMPLATES[HEX]:
            base = pyr_hex[:, list(reversed(face))]
            pyramids.append(np.concatenate([base, center_id[:, None]], axis=1))
        pyramids = np.stack(pyramids, axis=1).reshape(-1, 5)
        cell_kind = np.concatenate([np.full(prisms.shape[0], PRISM), np.full(pyramids.shape[0], PYRAMID)])
        cell_nodes = np.concatenate([_pad(prisms), _pad(pyramids)])
    bnodes, btags, patches = _box_boundary(nodes, cell_kind, cell_nodes, spec.lower, spec.upper)
    return RawMesh(nodes, cell_kind.astype(np.int64), cell_nodes, bnodes, btags, patches)


def gen_box(spec: BoxSpec) -> Mesh:
    mesh = compute_geometry(box_raw(spec))
    for axis in spec.periodic:
        mesh = pair_periodic(mesh, axis)
    logger.info(f"Box mesh ({spec.style}, {spec.cells}): {mesh.n_cells} cells, "
                f"periodic axes {''.join(spec.periodic) or 'none'}")
    return mesh


def gen_ogrid(r_inner: float = 0.5, r_outer: float = 20.0, n_radial: int = 48,
              n_theta: int = 96, span: float = 0.1, stretch: float = 1.08) -> Mesh:
    """One-cell thick hexahedral O-grid around a cylinder of radius `r_inner`.

    Patches: `wall` (r = r_inner), `farfield` (r = r_outer), `zmin`/`zmax` paired periodic.
    Radial spacing grows geometrically by `stretch`.
    """
    if n_radial < 1 or n_theta < 3 or r_outer <= r_inner or span <= 0.0:
        raise MeshError("invalid O-grid parameters")
    s = np.arange(n_radial + 1)
    if abs(stretch - 1.0) < 1e-12:
        frac = s / n_radial
    else:
        frac = (stretch ** s - 1.0) / (stretch ** n_radial - 1.0)
    radius = r_inner + (r_outer - r_inner) * frac
    theta = 2.0 * np.pi * np.arange(n_theta) / n_theta
    k_, j_, i_ = np.meshgrid(np.arange(2), np.arange(n_theta), np.arange(n_radial + 1), indexing="ij")
    nodes = np.stack([radius[i_] * np.cos(theta[j_]), radius[i_] * np.sin(theta[j_]), span * k_],
                     axis=-1).reshape(-1, 3)

    def nid(i, j, k):
        return i + (n_radial + 1) * ((j % n_theta) + n_theta * k)

    j, i = np.meshgrid(np.arange(n_theta), np.arange(n_radial), indexing="ij")
    i, j = i.ravel(), j.ravel()
    hexes = np.stack([nid(i, j, 0), nid(i + 1, j, 0), nid(i + 1, j + 1, 0), nid(i, j + 1, 0),
                      nid(i, j, 1), nid(i + 1, j, 1), nid(i + 1, j + 1, 1), nid(i, j + 1, 1)], axis=1)
    jt = np.arange(n_theta)
    wall = np.stack([nid(0, jt, 0), nid(0, jt + 1, 0), nid(0, jt + 1, 1), nid(0, jt, 1)], axis=1)
    far = np.stack([nid(n_radial, jt, 0), nid(n_radial, jt + 1, 0),
                    nid(n_radial, jt + 1, 1), nid(n_radial, jt, 1)], axis=1)
    zmin = hexes[:, [0, 1, 2, 3]]
    zmax = hexes[:, [4, 5, 6, 7]]
    bnodes = np.concatenate([wall, far, zmin, zmax])
    btags = np.concatenate([np.full(n_theta, 0), np.full(n_theta, 1),
                            np.full(len(zmin), 2), np.full(len(zmax), 3)])
    raw = RawMesh(nodes, np.full(hexes.shape[0], HEX, dtype=np.int64), _pad(hexes),
                  bnodes, btags, (Patch("wall"), Patch("farfield"), Patch("zmin"), Patch("zmax")))
    mesh = pair_periodic(compute_geometry(raw), "z")
    logger.info(f"O-grid: {mesh.n_cells} cells, r in [{r_inner}, {r_outer}]")
    return mesh


# =============================================================================
# PERIODIC PAIRING
# =============================================================================

def pair_periodic(mesh: Mesh, axis: str, tolerance: float = settings.PERIODIC_TOLERANCE,
                  low: str = None, high: str = None) -> Mesh:
    """Pair the boundary faces of patches `low`/`high` across `axis` by translated centroid."""
    a = AXES.index(axis)
    low = low or f"{axis}min"
    high = high or f"{axis}max"
    lo_faces = np.flatnonzero(mesh.face_patch == mesh.patch_index(low))
    hi_faces = np.flatnonzero(mesh.face_patch == mesh.patch_index(high))
    extent = np.ptp(mesh.nodes, axis=0)
    tol = tolerance * max(float(extent.max()), 1.0)

    lo_c = mesh.face_centroid[lo_faces]
    hi_c = mesh.face_centroid[hi_faces]
    period = (float(np.mean(hi_c[:, a])) - float(np.mean(lo_c[:, a]))) if lo_faces.size and hi_faces.size else 0.0
    offset = np.zeros(3)
    offset[a] = period

    if hi_faces.size == 0:
        if lo_faces.size:
            raise UnmatchedPeriodicFaceError(lo_c[0], axis)
        return mesh
    tree = cKDTree(hi_c - offset)
    dist, match = tree.query(lo_c, distance_upper_bound=max(tol, 1e-300))
    unmatched = np.flatnonzero(~np.isfinite(dist))
    if unmatched.size:
        raise UnmatchedPeriodicFaceError(lo_c[unmatched[0]], axis)
    if lo_faces.size != hi_faces.size or np.unique(match).size != match.size:
        spare = np.setdiff1d(np.arange(hi_faces.size), match)
        raise UnmatchedPeriodicFaceError(hi_c[spare[0]] if spare.size else hi_c[0], axis)

    partner = hi_faces[match]
    rel = np.abs(mesh.face_area[lo_faces] - mesh.face_area[partner]) / mesh.face_area[lo_faces]
    if np.any(rel > 1e-12):
        f = int(lo_faces[np.argmax(rel)])
        raise MeshError("periodic faces differ in area", face=f)
    if np.any(np.einsum("fi,fi->f", mesh.face_normal[lo_faces], mesh.face_normal[partner]) > -1.0 + 1e-10):
        raise MeshError("periodic faces are not anti-parallel", face=int(lo_faces[0]))

    shift = np.broadcast_to(-offset, (lo_faces.size, 3))
    paired = mesh.merge_periodic(lo_faces, partner, shift, axis, low, high)
    paired = paired.with_patch_kinds({low: PatchKind.PERIODIC, high: PatchKind.PERIODIC})
    logger.info(f"Paired {lo_faces.size} periodic faces along {axis}")
    return paired


# =============================================================================
# MSH 2.2
# =============================================================================

MSH_VOLUME_TYPES = {4: TET, 7: PYRAMID, 6: PRISM, 5: HEX}
MSH_SURFACE_TYPES = {2: 3, 3: 4}
MSH_IGNORED_TYPES = {1, 15}
MSH_TYPE_OF_KIND = {kind: code for code, kind in MSH_VOLUME_TYPES.items()}


def _sections(lines: List[str]) -> Dict[str, Tuple[int, List[str]]]:
    """Map section name to (line number of first body line, body lines)."""
    sections = {}
    i = 0
    while i < len(lines):
        head = lines[i].strip()
        if head.startswith("$") and not head.startswith("$End"):
            name = head[1:]
            end = f"$End{name}"
            j = i + 1
            while j < len(lines) and lines[j].strip() != end:
                j += 1
            if j == len(lines):
                raise MeshError(f"section ${name} is not terminated", line=i + 1)
            sections[name] = (i + 2, lines[i + 1:j])
            i = j
        i += 1
    return sections


def read_msh(path: Union[str, Path]) -> Mesh:
    """Read an ASCII MSH 2.2 file; surface elements tagged with a physical group become patches."""
    path = Path(path)
    lines = path.read_text().splitlines()
    sections = _sections(lines)
    for name in ("MeshFormat", "Nodes", "Elements"):
        if name not in sections:
            raise MeshError(f"missing ${name} section in {path.name}")
    _, fmt = sections["MeshFormat"]
    version, file_type = fmt[0].split()[:2]
    if not version.startswith("2") or file_type != "0":
        raise MeshError(f"only ASCII MSH 2.2 is supported, got version {version} type {file_type}")

    names = {}
    if "PhysicalNames" in sections:
        _, body = sections["PhysicalNames"]
        for row in body[1:]:
            dim, tag, name = row.split(maxsplit=2)
            if int(dim) == 2:
                names[int(tag)] = name.strip().strip('"')

    start, body = sections["Nodes"]
    count = int(body[0])
    node_index = {}
    nodes = np.empty((count, 3))
    for n, row in enumerate(body[1:count + 1]):
        parts = row.split()
        node_index[int(parts[0])] = n
        nodes[n] = [float(v) for v in parts[1:4]]

    start, body = sections["Elements"]
    count = int(body[0])
    kinds, cells, bfaces, btags = [], [], [], []
    for offset, row in enumerate(body[1:count + 1]):
        line = start + 1 + offset
        parts = [int(v) for v in row.split()]
        code, ntags = parts[1], parts[2]
        tags = parts[3:3 + ntags]
        try:
            conn = [node_index[v] for v in parts[3 + ntags:]]
        except KeyError as e:
            raise MeshError(f"element references undefined node {e.args[0]}", line=line)
        if code in MSH_IGNORED_TYPES:
            continue
        if code in MSH_VOLUME_TYPES:
            kind = MSH_VOLUME_TYPES[code]
            if len(conn) != NODES_PER_KIND[kind]:
                raise MeshError(f"{KIND_NAMES[kind]} with {len(conn)} nodes", line=line)
            kinds.append(kind)
            cells.append(conn + [-1] * (MAX_CELL_NODES - len(conn)))
        elif code in MSH_SURFACE_TYPES:
            if len(conn) != MSH_SURFACE_TYPES[code]:
                raise MeshError(f"surface element with {len(conn)} nodes", line=line)
            bfaces.append(conn + [-1] * (4 - len(conn)))
            btags.append(tags[0] if tags else 0)
        else:
            raise UnsupportedElementError(code, line=line)
    if not cells:
        raise MeshError(f"no volume elements in {path.name}")

    tag_order = sorted(set(btags))
    patches = tuple(Patch(names.get(t, f"patch_{t}")) for t in tag_order)
    tag_index = {t: i for i, t in enumerate(tag_order)}
    raw = RawMesh(nodes, np.asarray(kinds, dtype=np.int64), np.asarray(cells, dtype=np.int64),
                  np.asarray(bfaces, dtype=np.int64).reshape(-1, 4),
                  np.asarray([tag_index[t] for t in btags], dtype=np.int64), patches)
    logger.info(f"Read {path.name}: {len(cells)} volume elements, {len(bfaces)} surface elements")
    return compute_geometry(raw)


def _boundary_listing(mesh: Mesh):
    """Boundary faces per patch name, periodic pairs unfolded back into both sides."""
    by_patch: Dict[str, List[List[int]]] = {p.name: [] for p in mesh.patches}
    for f in mesh.boundary_faces:
        by_patch[mesh.patches[mesh.face_patch[f]].name].append(
            [int(n) for n in mesh.face_nodes[f] if n >= 0])
    for pair in mesh.periodic_pairs:
        f = pair.face
        by_patch[pair.low_patch].append([int(n) for n in mesh.face_nodes[f] if n >= 0])
        cell, local = mesh.face_neighbor[f], mesh.face_neighbor_local[f]
        template = FACE_TEMPLATES[int(mesh.cell_kind[cell])][local]
        by_patch[pair.high_patch].append([int(mesh.cell_nodes[cell, i]) for i in template])
    return by_patch


def write_msh(mesh: Mesh, path: Union[str, Path]) -> Path:
    """Write MSH 2.2 ASCII: tagged boundary surfaces first, then volume elements."""
    path = Path(path)
    by_patch = _boundary_listing(mesh)
    rows = []
    eid = 1
    for tag, (name, faces) in enumerate(by_patch.items(), start=1):
        for face in faces:
            code = 2 if len(face) == 3 else 3
            rows.append(f"{eid} {code} 2 {tag} {tag} " + " ".join(str(n + 1) for n in face))
            eid += 1
    volume_tag = len(by_patch) + 1
    for kind, conn in zip(mesh.cell_kind, mesh.cell_nodes):
        nn = NODES_PER_KIND[int(kind)]
        rows.append(f"{eid} {MSH_TYPE_OF_KIND[int(kind)]} 2 {volume_tag} {volume_tag} "
                    + " ".join(str(int(n) + 1) for n in conn[:nn]))
        eid += 1
    names = [f'2 {tag} "{name}"' for tag, name in enumerate(by_patch, start=1)]
    names.append(f'3 {volume_tag} "fluid"')
    text = ["$MeshFormat", "2.2 0 8", "$EndMeshFormat",
            "$PhysicalNames", str(len(names)), *names, "$EndPhysicalNames",
            "$Nodes", str(mesh.nodes.shape[0]),
            *(f"{i + 1} {x:.17g} {y:.17g} {z:.17g}" for i, (x, y, z) in enumerate(mesh.nodes)),
            "$EndNodes", "$Elements", str(len(rows)), *rows, "$EndElements"]
    path.write_text("\n".join(text) + "\n")
    return path


# =============================================================================
# NATIVE FORMAT
# =============================================================================

NATIVE_HEADER = "cgksmesh 1"


def write_native(mesh: Mesh, path: Union[str, Path]) -> Path:
    """Versioned text format.

        cgksmesh 1
        nodes <n>            then n lines "x y z"
        cells <n>            then n lines "<kind name> <node ids...>"
        patch <name> <kind|-> <n>   then n lines of face node ids, repeated per patch
        periodic <axis> <low patch> <high patch>   one line per paired axis
    """
    path = Path(path)
    by_patch = _boundary_listing(mesh)
    out = [NATIVE_HEADER, f"nodes {mesh.nodes.shape[0]}"]
    out += [f"{x:.17g} {y:.17g} {z:.17g}" for x, y, z in mesh.nodes]
    out.append(f"cells {mesh.n_cells}")
    for kind, conn in zip(mesh.cell_kind, mesh.cell_nodes):
        nn = NODES_PER_KIND[int(kind)]
        out.append(KIND_NAMES[int(kind)] + " " + " ".join(str(int(n)) for n in conn[:nn]))
    for patch in mesh.patches:
        faces = by_patch[patch.name]
        out.append(f"patch {patch.name} {patch.kind or '-'} {len(faces)}")
        out += [" ".join(map(str, face)) for face in faces]
    seen = []
    for pair in mesh.periodic_pairs:
        key = (pair.axis, pair.low_patch, pair.high_patch)
        if key not in seen:
            seen.append(key)
            out.append("periodic " + " ".join(key))
    path.write_text("\n".join(out) + "\n")
    return path


def read_native(path: Union[str, Path]) -> Mesh:
    path = Path(path)
    lines = path.read_text().splitlines()
    if not lines or lines[0].strip() != NATIVE_HEADER:
        raise MeshError(f"{path.name} is not a '{NATIVE_HEADER}' file", line=1)
    pos = 1

    def take(keyword):
        nonlocal pos
        parts = lines[pos].split()
        if not parts or parts[0] != keyword:
            raise MeshError(f"expected '{keyword}'", line=pos + 1)
        pos += 1
        return parts[1:]

    n = int(take("nodes")[0])
    nodes = np.array([[float(v) for v in lines[pos + i].split()] for i in range(n)]).reshape(-1, 3)
    pos += n
    n = int(take("cells")[0])
    kinds, cells = [], []
    for i in range(n):
        parts = lines[pos + i].split()
        if parts[0] not in KIND_NAMES:
            raise MeshError(f"unknown cell kind {parts[0]!r}", line=pos + i + 1)
        conn = [int(v) for v in parts[1:]]
        kinds.append(KIND_NAMES.index(parts[0]))
        cells.append(conn + [-1] * (MAX_CELL_NODES - len(conn)))
    pos += n

    patches, bfaces, btags, periodic = [], [], [], []
    while pos < len(lines) and lines[pos].strip():
        parts = lines[pos].split()
        if parts[0] == "patch":
            name, kind, count = parts[1], parts[2], int(parts[3])
            pos += 1
            for i in range(count):
                face = [int(v) for v in lines[pos + i].split()]
                bfaces.append(face + [-1] * (4 - len(face)))
                btags.append(len(patches))
            patches.append(Patch(name, None if kind == "-" else kind))
            pos += count
        elif parts[0] == "periodic":
            periodic.append(tuple(parts[1:4]))
            pos += 1
        else:
            raise MeshError(f"unexpected record {parts[0]!r}", line=pos + 1)

    raw = RawMesh(nodes, np.asarray(kinds, dtype=np.int64), np.asarray(cells, dtype=np.int64),
                  np.asarray(bfaces, dtype=np.int64).reshape(-1, 4), np.asarray(btags, dtype=np.int64),
                  tuple(patches))
    mesh = compute_geometry(raw)
    for axis, low, high in periodic:
        mesh = pair_periodic(mesh, axis, low=low, high=high)
    return mesh


def read_mesh(path: Union[str, Path]) -> Mesh:
    path = Path(path)
    if path.suffix == ".msh":
        return read_msh(path)
    if path.suffix == ".cgksmesh":
        return read_native(path)
    raise MeshError(f"unknown mesh file type {path.suffix!r}")


# =============================================================================
# SUMMARY
# =============================================================================

@dataclass
class MeshInfo:
    cells_by_kind: Dict[str, int]
    n_faces: int
    boundary_faces: Dict[str, int]
    periodic_pairs: int
    total_volume: float
    bounding_box: np.ndarray
    patch_kinds: Dict[str, str] = field(default_factory=dict)

    def lines(self) -> List[str]:
        out = ["cells: " + ", ".join(f"{k} {v}" for k, v in self.cells_by_kind.items() if v)]
        out.append(f"faces: {self.n_faces} ({self.periodic_pairs} periodic pairs)")
        for name, count in self.boundary_faces.items():
            out.append(f"patch {name} [{self.patch_kinds.get(name) or 'unassigned'}]: {count} faces")
        out.append(f"volume: {self.total_volume:.12g}")
        lo, hi = self.bounding_box
        out.append(f"bounding box: ({lo[0]:g}, {lo[1]:g}, {lo[2]:g}) - ({hi[0]:g}, {hi[1]:g}, {hi[2]:g})")
        return out


def mesh_info(mesh: Mesh) -> MeshInfo:
    counts = np.bincount(mesh.cell_kind, minlength=4)
    patch_counts = np.bincount(mesh.face_patch[mesh.face_patch >= 0], minlength=len(mesh.patches))
    return MeshInfo(
        cells_by_kind={KIND_NAMES[k]: int(counts[k]) for k in range(4)},
        n_faces=mesh.n_faces,
        boundary_faces={p.name: int(c) for p, c in zip(mesh.patches, patch_counts)},
        periodic_pairs=len(mesh.periodic_pairs),
        total_volume=float(mesh.cell_volume.sum()),
        bounding_box=mesh.bounding_box,
        patch_kinds={p.name: p.kind for p in mesh.patches},
    )
