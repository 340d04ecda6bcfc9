"""
Case configuration: INI case files parsed into a frozen CaseConfig
"""
import configparser
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, Optional, Tuple, Union

from . import settings
from .errors import ConfigError
from .mesh_tools import AXES, BOX_STYLES, PatchKind

logger = logging.getLogger("cgks.config")

RECONSTRUCTION_PATHS = ("two_step", "original")
CONVENTIONS = ("derivative", "printed")
INITIAL_CONDITIONS = ("sine_advection", "sod", "uniform")


@dataclass(frozen=True)
class FreeStream:
    rho: float = 1.0
    velocity: Tuple[float, float, float] = (0.0, 0.0, 0.0)
    pressure: float = 1.0


@dataclass(frozen=True)
class CaseConfig:
    name: str = "case"
    # [mesh]
    mesh_source: str = "box"                 # box | ogrid | path to .msh / .cgksmesh
    box_style: str = "hex"
    box_cells: Tuple[int, int, int] = (10, 10, 10)
    box_lower: Tuple[float, float, float] = (0.0, 0.0, 0.0)
    box_upper: Tuple[float, float, float] = (2.0, 2.0, 2.0)
    periodic: Tuple[str, ...] = AXES
    ogrid_r_inner: float = 0.5
    ogrid_r_outer: float = 48.0
    ogrid_n_radial: int = 75
    ogrid_n_theta: int = 126
    ogrid_span: float = 0.1
    ogrid_stretch: float = 1.0825
    # [case]
    initial: str = "sine_advection"
    end_time: float = 2.0
    max_steps: int = 1_000_000
    # [physics]
    gamma: float = settings.GAMMA
    mu: float = 0.0
    # [numerics]
    cfl: float = settings.CFL
    reconstruction: str = "two_step"
    df: bool = True
    weno: bool = True
    convention: str = "derivative"
    mid_stage_slopes: bool = True
    c1: float = settings.COLLISION_C1
    c2: float = settings.COLLISION_C2
    workers: int = settings.WORKERS
    # [boundary]
    boundary: Dict[str, str] = field(default_factory=dict)
    # [freestream]
    freestream: FreeStream = FreeStream()
    # [output]
    output_dir: str = settings.OUTPUT_DIR
    vtk_every: int = 0
    log_every: int = 10
    write_vtk: bool = True
    record: bool = False

    def __post_init__(self):
        checks = (
            ("mesh", "style", self.box_style in BOX_STYLES, f"must be one of {BOX_STYLES}"),
            ("mesh", "cells", len(self.box_cells) == 3 and min(self.box_cells) >= 2, "needs 3 counts >= 2"),
            ("mesh", "upper", all(u > l for l, u in zip(self.box_lower, self.box_upper)), "must exceed lower"),
            ("case", "initial", self.initial in INITIAL_CONDITIONS, f"must be one of {INITIAL_CONDITIONS}"),
            ("case", "end_time", self.end_time > 0.0, "must be positive"),
            ("case", "max_steps", self.max_steps > 0, "must be positive"),
            ("physics", "gamma", 1.0 < self.gamma < 5.0 / 3.0 + 1e-12, "must lie in (1, 5/3]"),
            ("physics", "mu", self.mu >= 0.0, "must be non-negative"),
            ("numerics", "cfl", 0.0 < self.cfl <= 1.0, "must lie in (0, 1]"),
            ("numerics", "reconstruction", self.reconstruction in RECONSTRUCTION_PATHS,
             f"must be one of {RECONSTRUCTION_PATHS}"),
            ("numerics", "convention", self.convention in CONVENTIONS, f"must be one of {CONVENTIONS}"),
            ("numerics", "c1", self.c1 >= 0.0, "must be non-negative"),
            ("numerics", "c2", self.c2 >= 0.0, "must be non-negative"),
            ("numerics", "workers", self.workers >= 1, "must be at least 1"),
            ("freestream", "rho", self.freestream.rho > 0.0, "must be positive"),
            ("freestream", "pressure", self.freestream.pressure > 0.0, "must be positive"),
        )
        for section, key, ok, message in checks:
            if not ok:
                raise ConfigError(message, section, key)
        for patch, kind in self.boundary.items():
            if kind not in PatchKind.ALL:
                raise ConfigError(f"unknown patch kind {kind!r}", "boundary", patch)

    @property
    def mesh_is_file(self) -> bool:
        return self.mesh_source not in ("box", "ogrid")


def _floats(text: str, n: Optional[int] = None) -> Tuple[float, ...]:
    values = tuple(float(v) for v in text.split())
    if n is not None and len(values) != n:
        raise ValueError(f"expected {n} values, got {len(values)}")
    return values


def _cells(text: str) -> Tuple[int, int, int]:
    values = tuple(int(v) for v in text.split())
    if len(values) == 1:
        return values * 3
    if len(values) != 3:
        raise ValueError("expected 1 or 3 cell counts")
    return values


def _axes(text: str) -> Tuple[str, ...]:
    text = text.strip().lower()
    if text in ("none", "", "-"):
        return ()
    axes = tuple(a for a in text if not a.isspace() and a != ",")
    for a in axes:
        if a not in AXES:
            raise ValueError(f"unknown axis {a!r}")
    return axes


def _bool(text: str) -> bool:
    lowered = text.strip().lower()
    if lowered in ("1", "yes", "true", "on"):
        return True
    if lowered in ("0", "no", "false", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


# section -> key -> (CaseConfig field, parser)
SCHEMA = {
    "mesh": {
        "source": ("mesh_source", str),
        "style": ("box_style", str),
        "cells": ("box_cells", _cells),
        "lower": ("box_lower", lambda s: _floats(s, 3)),
        "upper": ("box_upper", lambda s: _floats(s, 3)),
        "periodic": ("periodic", _axes),
        "r_inner": ("ogrid_r_inner", float),
        "r_outer": ("ogrid_r_outer", float),
        "n_radial": ("ogrid_n_radial", int),
        "n_theta": ("ogrid_n_theta", int),
        "span": ("ogrid_span", float),
        "stretch": ("ogrid_stretch", float),
    },
    "case": {
        "name": ("name", str),
        "initial": ("initial", str),
        "end_time": ("end_time", float),
        "max_steps": ("max_steps", int),
    },
    "physics": {
        "gamma": ("gamma", float),
        "mu": ("mu", float),
    },
    "numerics": {
        "cfl": ("cfl", float),
        "reconstruction": ("reconstruction", str),
        "df": ("df", _bool),
        "weno": ("weno", _bool),
        "convention": ("convention", str),
        "mid_stage_slopes": ("mid_stage_slopes", _bool),
        "c1": ("c1", float),
        "c2": ("c2", float),
        "workers": ("workers", int),
    },
    "output": {
        "directory": ("output_dir", str),
        "vtk_every": ("vtk_every", int),
        "log_every": ("log_every", int),
        "write_vtk": ("write_vtk", _bool),
        "record": ("record", _bool),
    },
}

FREESTREAM_KEYS = {
    "rho": ("rho", float),
    "velocity": ("velocity", lambda s: _floats(s, 3)),
    "pressure": ("pressure", float),
}


def parse_case(text: str, base_dir: Union[str, Path, None] = None) -> CaseConfig:
    """Parse case-file text. Relative mesh paths resolve against `base_dir`."""
    parser = configparser.ConfigParser(inline_comment_prefixes=(";", "#"), interpolation=None)
    parser.optionxform = str
    try:
        parser.read_string(text)
    except configparser.Error as e:
        raise ConfigError(f"malformed case file: {e}")

    values = {}
    freestream = {}
    boundary = {}
    for section in parser.sections():
        items = parser.items(section)
        if section == "boundary":
            boundary = {k: v.strip() for k, v in items}
            continue
        if section == "freestream":
            schema = FREESTREAM_KEYS
            target = freestream
        elif section in SCHEMA:
            schema = SCHEMA[section]
            target = values
        else:
            raise ConfigError("unknown section", section)
        for key, raw in items:
            if key not in schema:
                raise ConfigError("unknown key", section, key)
            name, convert = schema[key]
            try:
                target[name] = convert(raw.strip())
            except ValueError as e:
                raise ConfigError(str(e), section, key)

    if "mesh_source" in values and values["mesh_source"] == "hybrid":
        values["mesh_source"] = "box"
        values.setdefault("box_style", "hybrid")
    source = values.get("mesh_source")
    if source and source not in ("box", "ogrid"):
        path = Path(source)
        if not path.is_absolute() and base_dir is not None:
            path = Path(base_dir) / path
        if path.suffix not in (".msh", ".cgksmesh"):
            raise ConfigError("mesh file must end in .msh or .cgksmesh", "mesh", "source")
        values["mesh_source"] = str(path)
    return CaseConfig(boundary=boundary, freestream=FreeStream(**freestream), **values)


def load_case(path: Union[str, Path]) -> CaseConfig:
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"case file {path} not found")
    config = parse_case(path.read_text(), base_dir=path.parent)
    logger.info(f"Loaded case '{config.name}' from {path}")
    return config
