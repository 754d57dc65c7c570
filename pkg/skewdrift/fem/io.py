"""
CSV and JSON import/export for meshes, fields and reports.
"""

import csv
import json
import logging
import math
from pathlib import Path
from typing import Any, Dict, Iterable, List, Sequence, Union

import numpy as np

from skewdrift.config.settings import SCHEMA_VERSION
from skewdrift.fem.fields import Layout, ScalarField, SkewField, VectorField
from skewdrift.fem.mesh import Domain, Mesh
from skewdrift.utils.errors import ValidationError

logger = logging.getLogger("mesh")

PathLike = Union[str, Path]
Field = Union[ScalarField, VectorField, SkewField]


def write_mesh_csv(mesh: Mesh, directory: PathLike, stem: str = "mesh") -> List[Path]:
    """
    Write ``<stem>_vertices.csv`` (coordinates + boundary flag) and
    ``<stem>_cells.csv`` (vertex indices).

    Returns:
        List[Path]: The written files
    """
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    axes = "xyz"[: mesh.dimension]
    vertex_path = directory / f"{stem}_vertices.csv"
    with open(vertex_path, "w", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(["# domain", mesh.domain.kind.value, "resolution", mesh.resolution])
        writer.writerow(list(axes) + ["boundary"])
        for point, flag in zip(mesh.vertices, mesh.boundary):
            writer.writerow([repr(float(c)) for c in point] + [int(flag)])
    cell_path = directory / f"{stem}_cells.csv"
    with open(cell_path, "w", newline="") as f:
        writer = csv.writer(f)
        writer.writerow([f"v{j}" for j in range(mesh.dimension + 1)])
        writer.writerows(mesh.cells.tolist())
    return [vertex_path, cell_path]


def read_mesh_csv(directory: PathLike, stem: str = "mesh") -> Mesh:
    """Read a mesh written by :func:`write_mesh_csv`."""
    directory = Path(directory)
    with open(directory / f"{stem}_vertices.csv", newline="") as f:
        rows = list(csv.reader(f))
    domain = Domain.from_name(rows[0][1])
    resolution = int(rows[0][3])
    table = np.array(rows[2:], dtype=float)
    with open(directory / f"{stem}_cells.csv", newline="") as f:
        cells = np.array(list(csv.reader(f))[1:], dtype=int)
    if table.shape[1] != domain.dimension + 1 or cells.shape[1] != domain.dimension + 1:
        raise ValidationError(f"mesh tables in {directory} do not match a {domain.kind.value} mesh")
    return Mesh(domain=domain, vertices=table[:, :-1], cells=cells,
                boundary=table[:, -1].astype(bool), resolution=resolution)


def _field_kind(field: Field) -> str:
    if isinstance(field, ScalarField):
        return field.layout.value
    return "vector" if isinstance(field, VectorField) else "skew"


def _field_table(field: Field) -> np.ndarray:
    values = np.asarray(field.values)
    return values[:, None] if values.ndim == 1 else values


def write_field_csv(field: Field, path: PathLike) -> Path:
    """Write a value table whose header line names the layout."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    table = _field_table(field)
    with open(path, "w", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(["# layout", _field_kind(field)])
        writer.writerow([f"c{j}" for j in range(table.shape[1])])
        for row in table:
            writer.writerow([repr(float(v)) for v in row])
    return path


def read_field_csv(mesh: Mesh, path: PathLike) -> Field:
    """Read a field written by :func:`write_field_csv` onto its mesh."""
    with open(path, newline="") as f:
        rows = list(csv.reader(f))
    kind = rows[0][1]
    table = np.array(rows[2:], dtype=float)
    return _build_field(mesh, kind, table)


def _build_field(mesh: Mesh, kind: str, table: np.ndarray) -> Field:
    if kind in (Layout.VERTEX.value, Layout.CELL.value):
        return ScalarField(mesh, table.reshape(-1), Layout(kind))
    if kind == "vector":
        return VectorField(mesh, table)
    if kind == "skew":
        return SkewField(mesh, table)
    raise ValidationError(f"unknown field layout '{kind}'")


def write_container_json(mesh: Mesh, fields: Dict[str, Field], path: PathLike) -> Path:
    """Write a mesh and named fields into one JSON container."""
    payload = {
        "schema": SCHEMA_VERSION,
        "mesh": {
            "domain": mesh.domain.kind.value,
            "resolution": mesh.resolution,
            "vertices": mesh.vertices.tolist(),
            "cells": mesh.cells.tolist(),
            "boundary": mesh.boundary.astype(int).tolist(),
        },
        "fields": {
            name: {"layout": _field_kind(field), "values": _field_table(field).tolist()}
            for name, field in fields.items()
        },
    }
    return write_json(payload, path)


def read_container_json(path: PathLike):
    """
    Read a JSON container.

    Returns:
        Tuple of (Mesh, Dict[str, field])
    """
    with open(path, "r") as f:
        payload = json.load(f)
    block = payload["mesh"]
    mesh = Mesh(
        domain=Domain.from_name(block["domain"]),
        vertices=np.array(block["vertices"], dtype=float),
        cells=np.array(block["cells"], dtype=int),
        boundary=np.array(block["boundary"], dtype=bool),
        resolution=int(block["resolution"]),
    )
    fields = {
        name: _build_field(mesh, entry["layout"], np.array(entry["values"], dtype=float))
        for name, entry in payload.get("fields", {}).items()
    }
    return mesh, fields


def to_jsonable(value: Any) -> Any:
    """Convert numpy scalars/arrays and non-finite floats for JSON."""
    if isinstance(value, dict):
        return {str(k): to_jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [to_jsonable(v) for v in value]
    if isinstance(value, np.ndarray):
        return to_jsonable(value.tolist())
    if isinstance(value, (np.bool_, bool)):
        return bool(value)
    if isinstance(value, (np.integer,)):
        return int(value)
    if isinstance(value, (float, np.floating)):
        value = float(value)
        if math.isnan(value):
            return "nan"
        if math.isinf(value):
            return "inf" if value > 0 else "-inf"
        return value
    return value


def write_json(payload: Dict[str, Any], path: PathLike) -> Path:
    """Write JSON with sorted keys; identical payloads give identical bytes."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w") as f:
        json.dump(to_jsonable(payload), f, indent=2, sort_keys=True)
        f.write("\n")
    return path


def write_table_csv(rows: Iterable[Dict[str, Any]], path: PathLike, columns: Sequence[str]) -> Path:
    """Write a list of row dictionaries as CSV."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as f:
        writer = csv.DictWriter(f, fieldnames=list(columns), extrasaction="ignore")
        writer.writeheader()
        for row in rows:
            writer.writerow(to_jsonable(row))
    logger.debug(f"Wrote table {path}")
    return path
