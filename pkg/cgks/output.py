"""
Solution files (legacy VTK through a Jinja2 template) and CSV tables
"""
import csv
import logging
from pathlib import Path
from typing import Dict, Iterable, Optional, Sequence, Union

import numpy as np
from jinja2 import Environment, FileSystemLoader

from . import settings
from .kinetic import conserved_to_primitive
from .mesh import HEX, NODES_PER_KIND, PRISM, PYRAMID, TET, Mesh

logger = logging.getLogger("cgks.output")

VTK_CELL_TYPES = {TET: 10, PYRAMID: 14, PRISM: 13, HEX: 12}
# VTK wedges wind the first triangle the other way round
VTK_NODE_ORDER = {PRISM: (0, 2, 1, 3, 5, 4)}

templates = Environment(loader=FileSystemLoader(str(Path(__file__).parent / "templates")),
                        autoescape=False, keep_trailing_newline=True)


def cell_fields(W: np.ndarray, alpha: Optional[np.ndarray] = None,
                gamma: float = settings.GAMMA) -> Dict[str, np.ndarray]:
    rho, U, p = conserved_to_primitive(W, gamma)
    mach = np.linalg.norm(U, axis=-1) / np.sqrt(gamma * p / rho)
    return {
        "rho": rho,
        "U": U,
        "p": p,
        "Mach": mach,
        "alpha": np.ones_like(rho) if alpha is None else np.asarray(alpha, dtype=float),
    }


def _cell_rows(mesh: Mesh):
    rows = []
    size = 0
    for kind, conn in zip(mesh.cell_kind, mesh.cell_nodes):
        nodes = conn[:NODES_PER_KIND[kind]]
        order = VTK_NODE_ORDER.get(int(kind))
        if order is not None:
            nodes = nodes[list(order)]
        rows.append(f"{nodes.size} " + " ".join(str(int(n)) for n in nodes))
        size += nodes.size + 1
    return rows, size


def write_solution(mesh: Mesh, W: np.ndarray, path: Union[str, Path], alpha: Optional[np.ndarray] = None,
                   gamma: float = settings.GAMMA, title: str = "cgks solution") -> Path:
    """Legacy ASCII VTK unstructured grid with cell data ρ, U, p, Mach and α."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fields = cell_fields(W, alpha, gamma)
    cells, cell_size = _cell_rows(mesh)
    text = templates.get_template("solution.vtk.j2").render(
        title=title,
        points=[f"{x:.12g} {y:.12g} {z:.12g}" for x, y, z in mesh.nodes],
        cells=cells,
        cell_size=cell_size,
        types=[VTK_CELL_TYPES[int(k)] for k in mesh.cell_kind],
        scalars=[(name, [f"{v:.12g}" for v in fields[name]]) for name in ("rho", "p", "Mach", "alpha")],
        vectors=[("U", [f"{u:.12g} {v:.12g} {w:.12g}" for u, v, w in fields["U"]])],
    )
    path.write_text(text)
    logger.info(f"Wrote {path} ({mesh.n_cells} cells)")
    return path


def write_table(path: Union[str, Path], header: Sequence[str], rows: Iterable[Sequence]) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="") as handle:
        writer = csv.writer(handle)
        writer.writerow(header)
        for row in rows:
            writer.writerow([f"{v:.6e}" if isinstance(v, float) else v for v in row])
    logger.info(f"Wrote {path}")
    return path
