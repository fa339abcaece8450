"""CSV and JSON serialization of sampled surfaces.

CSV files carry optional ``# key: value`` comment lines (used for the
configuration hash and seed), a header row (``z,r``, ``r,f``, ``theta,z,u`` or
``theta,z,t,u``) and one node per line with 17 significant digits.  The JSON
envelope is ``{"grid": ..., "values": ..., "metadata": ...}``.
"""

from __future__ import annotations

import json
from pathlib import Path
from typing import Mapping, Optional, Union

import numpy as np

from .errors import ParameterError
from .geometry_core import CylinderGraph, GraphProfile, Grid1D, RadialProfile
from .neck_analysis import NeckPatch

Surface = Union[RadialProfile, GraphProfile, CylinderGraph, NeckPatch]

_FMT = "%.17g"


def _columns(surface: Surface):
    if isinstance(surface, RadialProfile):
        return ("z", "r"), np.column_stack([surface.z, surface.r])
    if isinstance(surface, GraphProfile):
        return ("r", "f"), np.column_stack([surface.rr, surface.f])
    if isinstance(surface, CylinderGraph):
        T, Z = surface.mesh()
        return ("theta", "z", "u"), np.column_stack([T.ravel(), Z.ravel(), surface.u.ravel()])
    if isinstance(surface, NeckPatch):
        Tm, TH, Z = np.meshgrid(surface.times, surface.theta, surface.z, indexing="ij")
        return ("theta", "z", "t", "u"), np.column_stack([TH.ravel(), Z.ravel(), Tm.ravel(), surface.u.ravel()])
    raise TypeError(f"cannot serialize {type(surface).__name__}")


def format_csv(surface: Surface, metadata: Optional[Mapping] = None) -> str:
    """Return the CSV text of ``surface``."""
    header, data = _columns(surface)
    lines = [f"# {k}: {v}" for k, v in sorted((metadata or {}).items())]
    lines.append(",".join(header))
    lines.extend(",".join(_FMT % x for x in row) for row in data)
    return "\n".join(lines) + "\n"


def write_csv(path, surface: Surface, metadata: Optional[Mapping] = None) -> Path:
    """Write ``surface`` as CSV to ``path``."""
    path = Path(path)
    path.write_text(format_csv(surface, metadata))
    return path


def _uniform_grid(values: np.ndarray, label: str) -> Grid1D:
    grid = Grid1D(float(values[0]), float(values[-1]), values.size)
    if not np.allclose(values, grid.nodes, rtol=0, atol=1e-9 * max(1.0, abs(grid.hi - grid.lo))):
        raise ParameterError(f"{label} column is not a uniform grid")
    return grid


def parse_csv(text: str):
    """Parse CSV text into ``(surface, metadata)``."""
    metadata = {}
    rows = []
    header = None
    for raw in text.splitlines():
        line = raw.strip()
        if not line:
            continue
        if line.startswith("#"):
            key, _, value = line[1:].partition(":")
            metadata[key.strip()] = value.strip()
            continue
        if header is None:
            header = tuple(c.strip() for c in line.split(","))
            continue
        rows.append([float(x) for x in line.split(",")])
    if header is None or not rows:
        raise ParameterError("CSV has no header or no data rows")
    data = np.asarray(rows, dtype=float)
    if header == ("z", "r"):
        return RadialProfile(_uniform_grid(data[:, 0], "z"), data[:, 1]), metadata
    if header == ("r", "f"):
        return GraphProfile(_uniform_grid(data[:, 0], "r"), data[:, 1]), metadata
    if header == ("theta", "z", "u"):
        zs = np.unique(data[:, 1])
        nth = data.shape[0] // zs.size
        if nth * zs.size != data.shape[0]:
            raise ParameterError("theta,z,u rows do not form a product grid")
        u = data[:, 2].reshape(nth, zs.size)
        return CylinderGraph(nth, _uniform_grid(zs, "z"), u), metadata
    if header == ("theta", "z", "t", "u"):
        ths, zs, ts = (np.unique(data[:, k]) for k in range(3))
        if ths.size * zs.size * ts.size != data.shape[0]:
            raise ParameterError("theta,z,t,u rows do not form a product grid")
        order = np.lexsort((data[:, 1], data[:, 0], data[:, 2]))
        u = data[order, 3].reshape(ts.size, ths.size, zs.size)
        return NeckPatch(ths.size, _uniform_grid(zs, "z"), ts, u), metadata
    raise ParameterError(f"unknown CSV header {','.join(header)}")


def read_csv(path):
    """Read a surface written by :func:`write_csv`; returns ``(surface, metadata)``."""
    return parse_csv(Path(path).read_text())


def to_envelope(surface: Surface, metadata: Optional[Mapping] = None) -> dict:
    """JSON-ready envelope ``{grid, values, metadata}``."""
    if isinstance(surface, RadialProfile):
        grid, values, kind = surface.grid.to_dict(), {"r": surface.r.tolist()}, "radial"
    elif isinstance(surface, GraphProfile):
        grid, values, kind = surface.grid.to_dict(), {"f": surface.f.tolist()}, "graph"
    elif isinstance(surface, CylinderGraph):
        grid = {"z": surface.zgrid.to_dict(), "ntheta": surface.ntheta}
        values, kind = {"u": surface.u.tolist()}, "cylinder_graph"
    else:
        raise TypeError(f"cannot serialize {type(surface).__name__}")
    meta = dict(metadata or {})
    meta["kind"] = kind
    return {"grid": grid, "values": values, "metadata": meta}


def from_envelope(doc: Mapping) -> Surface:
    """Inverse of :func:`to_envelope`."""
    kind = doc["metadata"]["kind"]
    if kind == "radial":
        return RadialProfile(Grid1D(**doc["grid"]), np.asarray(doc["values"]["r"]))
    if kind == "graph":
        return GraphProfile(Grid1D(**doc["grid"]), np.asarray(doc["values"]["f"]))
    if kind == "cylinder_graph":
        return CylinderGraph(doc["grid"]["ntheta"], Grid1D(**doc["grid"]["z"]), np.asarray(doc["values"]["u"]))
    raise ParameterError(f"unknown envelope kind {kind!r}")


def dumps(obj) -> str:
    """Deterministic JSON text (sorted keys, fixed separators)."""
    return json.dumps(obj, sort_keys=True, indent=2, default=_json_default) + "\n"


def _json_default(o):
    if isinstance(o, np.ndarray):
        return o.tolist()
    if isinstance(o, (np.floating, np.integer)):
        return o.item()
    if isinstance(o, np.bool_):
        return bool(o)
    raise TypeError(f"not JSON serializable: {type(o).__name__}")
