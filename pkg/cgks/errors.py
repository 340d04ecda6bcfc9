"""
Exception hierarchy for the CGKS solver
"""
from typing import Optional, Sequence


class CGKSError(Exception):
    """Base class for all solver errors"""


class ConfigError(CGKSError):
    """Invalid or incomplete case configuration"""

    def __init__(self, message: str, section: Optional[str] = None, key: Optional[str] = None):
        where = ""
        if section:
            where = f"[{section}]" + (f" {key}" if key else "")
            message = f"{where}: {message}"
        super().__init__(message)
        self.section = section
        self.key = key


class MeshError(CGKSError):
    """Rejected mesh topology or geometry"""

    def __init__(self, message: str, cell: Optional[int] = None, face: Optional[int] = None,
                 line: Optional[int] = None):
        context = []
        if cell is not None:
            context.append(f"cell {cell}")
        if face is not None:
            context.append(f"face {face}")
        if line is not None:
            context.append(f"line {line}")
        if context:
            message = f"{message} ({', '.join(context)})"
        super().__init__(message)
        self.cell = cell
        self.face = face
        self.line = line


class UnsupportedElementError(MeshError):
    def __init__(self, type_code: int, line: Optional[int] = None):
        super().__init__(f"unsupported element type {type_code}", line=line)
        self.type_code = type_code


class UnmatchedPeriodicFaceError(MeshError):
    def __init__(self, centroid: Sequence[float], axis: str):
        c = ", ".join(f"{v:.6g}" for v in centroid)
        super().__init__(f"no periodic partner along {axis} for face at ({c})")
        self.centroid = tuple(float(v) for v in centroid)
        self.axis = axis


class NonPhysicalStateError(CGKSError):
    """Density or internal energy not positive"""

    def __init__(self, message: str, component: Optional[str] = None,
                 cell: Optional[int] = None, time: Optional[float] = None):
        context = []
        if component:
            context.append(component)
        if cell is not None:
            context.append(f"cell {cell}")
        if time is not None:
            context.append(f"t={time:.6g}")
        if context:
            message = f"{message} ({', '.join(context)})"
        super().__init__(message)
        self.component = component
        self.cell = cell
        self.time = time


class SolverError(CGKSError):
    """A time step could not be completed"""

    def __init__(self, message: str, step: Optional[int] = None, time: Optional[float] = None):
        if step is not None or time is not None:
            message = f"{message} (step {step}, t={time:.6g})" if time is not None else f"{message} (step {step})"
        super().__init__(message)
        self.step = step
        self.time = time
