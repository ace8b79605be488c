"""Indexed triangle meshes with OBJ/PLY input and output.

Meshes are cleaned on construction: vertices closer than ``MERGE_TOL`` are
merged and triangles with area below ``DEGENERATE_AREA`` are dropped.
"""

from __future__ import annotations

from pathlib import Path

import numpy as np

from .errors import InputError

MERGE_TOL = 1e-6
DEGENERATE_AREA = 1e-9


class TriMesh:
    """Immutable indexed triangle surface in a local metric frame.

    Attributes
    ----------
    vertices : (n, 3) float64 array
    triangles : (m, 3) int64 array of vertex indices
    normals : (m, 3) float64 array, unit per-triangle normals from winding
    areas : (m,) float64 array
    """

    def __init__(self, vertices, triangles, clean: bool = True):
        vertices = np.asarray(vertices, dtype=np.float64).reshape(-1, 3)
        triangles = np.asarray(triangles, dtype=np.int64).reshape(-1, 3)
        if triangles.size and (triangles.min() < 0 or triangles.max() >= len(vertices)):
            raise InputError("triangle index out of range")
        if clean:
            vertices, triangles = _merge_vertices(vertices, triangles)
            triangles = _drop_degenerate(vertices, triangles)
        if len(triangles) == 0:
            raise InputError("mesh is empty after cleaning")
        self.vertices = vertices
        self.triangles = triangles
        cross = np.cross(
            vertices[triangles[:, 1]] - vertices[triangles[:, 0]],
            vertices[triangles[:, 2]] - vertices[triangles[:, 0]],
        )
        norm = np.linalg.norm(cross, axis=1)
        self.areas = 0.5 * norm
        self.normals = cross / norm[:, None]
        self.vertices.setflags(write=False)
        self.triangles.setflags(write=False)

    @property
    def n_vertices(self) -> int:
        return len(self.vertices)

    @property
    def n_triangles(self) -> int:
        return len(self.triangles)

    @property
    def area(self) -> float:
        return float(self.areas.sum())

    def bounds(self):
        """(min_xyz, max_xyz) of the vertex cloud."""
        return self.vertices.min(axis=0), self.vertices.max(axis=0)

    def corners(self):
        """(m, 3, 3) triangle corner coordinates."""
        return self.vertices[self.triangles]

    def is_watertight(self) -> bool:
        """True when every edge is shared by exactly two triangles."""
        tri = self.triangles
        edges = np.concatenate([tri[:, [0, 1]], tri[:, [1, 2]], tri[:, [2, 0]]])
        edges = np.sort(edges, axis=1)
        _, counts = np.unique(edges, axis=0, return_counts=True)
        return bool(np.all(counts == 2))

    def save(self, path) -> None:
        path = Path(path)
        if path.suffix.lower() == ".obj":
            _save_obj(self, path)
        elif path.suffix.lower() == ".ply":
            _save_ply(self, path)
        else:
            raise InputError(f"unsupported mesh format: {path.suffix}")


def load_mesh(path) -> TriMesh:
    """Load an OBJ or PLY (ASCII or binary little-endian) mesh file."""
    path = Path(path)
    if not path.is_file():
        raise InputError(f"mesh file not found: {path}")
    suffix = path.suffix.lower()
    if suffix == ".obj":
        vertices, triangles = _parse_obj(path)
    elif suffix == ".ply":
        vertices, triangles = _parse_ply(path)
    else:
        raise InputError(f"unsupported mesh format: {suffix}")
    return TriMesh(vertices, triangles)


def _merge_vertices(vertices, triangles):
    # Quantize to the merge tolerance so near-duplicates land on one key.
    key = np.round(vertices / MERGE_TOL).astype(np.int64)
    _, first, inverse = np.unique(key, axis=0, return_index=True, return_inverse=True)
    order = np.argsort(first)
    rank = np.empty_like(order)
    rank[order] = np.arange(len(order))
    return vertices[first[order]], rank[inverse][triangles]


def _drop_degenerate(vertices, triangles):
    a, b, c = (vertices[triangles[:, i]] for i in range(3))
    area = 0.5 * np.linalg.norm(np.cross(b - a, c - a), axis=1)
    distinct = (
        (triangles[:, 0] != triangles[:, 1])
        & (triangles[:, 1] != triangles[:, 2])
        & (triangles[:, 0] != triangles[:, 2])
    )
    return triangles[(area > DEGENERATE_AREA) & distinct]


def _parse_obj(path):
    vertices = []
    faces = []
    try:
        with open(path, "r", encoding="utf-8", errors="replace") as fh:
            for line in fh:
                parts = line.split()
                if not parts:
                    continue
                if parts[0] == "v":
                    vertices.append([float(x) for x in parts[1:4]])
                elif parts[0] == "f":
                    idx = [int(p.split("/")[0]) for p in parts[1:]]
                    idx = [i - 1 if i > 0 else len(vertices) + i for i in idx]
                    for k in range(1, len(idx) - 1):  # fan-triangulate polygons
                        faces.append([idx[0], idx[k], idx[k + 1]])
    except (OSError, ValueError, IndexError) as exc:
        raise InputError(f"failed to parse OBJ {path}: {exc}") from exc
    if not vertices or not faces:
        raise InputError(f"OBJ {path} contains no geometry")
    return np.array(vertices), np.array(faces)


_PLY_TYPES = {
    "char": "i1", "uchar": "u1", "int8": "i1", "uint8": "u1",
    "short": "i2", "ushort": "u2", "int16": "i2", "uint16": "u2",
    "int": "i4", "uint": "u4", "int32": "i4", "uint32": "u4",
    "float": "f4", "float32": "f4", "double": "f8", "float64": "f8",
}


def _parse_ply(path):
    try:
        with open(path, "rb") as fh:
            data = fh.read()
    except OSError as exc:
        raise InputError(f"failed to read PLY {path}: {exc}") from exc
    end = data.find(b"end_header")
    if not data.startswith(b"ply") or end < 0:
        raise InputError(f"{path} is not a PLY file")
    end = data.index(b"\n", end) + 1
    header = data[:end].decode("ascii", errors="replace").splitlines()
    body = data[end:]

    fmt = None
    elements = []  # (name, count, [(prop_name, dtype, is_list, count_dtype)])
    for line in header:
        parts = line.split()
        if not parts:
            continue
        if parts[0] == "format":
            fmt = parts[1]
        elif parts[0] == "element":
            elements.append((parts[1], int(parts[2]), []))
        elif parts[0] == "property":
            if parts[1] == "list":
                elements[-1][2].append((parts[4], _PLY_TYPES[parts[3]], True, _PLY_TYPES[parts[2]]))
            else:
                elements[-1][2].append((parts[2], _PLY_TYPES[parts[1]], False, None))
    if fmt not in ("ascii", "binary_little_endian"):
        raise InputError(f"unsupported PLY format: {fmt}")

    if fmt == "ascii":
        return _parse_ply_ascii(body, elements, path)
    return _parse_ply_binary(body, elements, path)


def _parse_ply_ascii(body, elements, path):
    tokens = body.split()
    pos = 0
    vertices = None
    faces = []
    for name, count, props in elements:
        rows = []
        for _ in range(count):
            row = {}
            for pname, dtype, is_list, _ in props:
                if is_list:
                    n = int(tokens[pos]); pos += 1
                    row[pname] = [int(t) for t in tokens[pos:pos + n]]
                    pos += n
                else:
                    row[pname] = float(tokens[pos]); pos += 1
            rows.append(row)
        if name == "vertex":
            vertices = np.array([[r["x"], r["y"], r["z"]] for r in rows])
        elif name == "face":
            for r in rows:
                idx = next(iter(r.values()))
                for k in range(1, len(idx) - 1):
                    faces.append([idx[0], idx[k], idx[k + 1]])
    if vertices is None or not faces:
        raise InputError(f"PLY {path} contains no triangle geometry")
    return vertices, np.array(faces)


def _parse_ply_binary(body, elements, path):
    offset = 0
    vertices = None
    faces = []
    for name, count, props in elements:
        fixed = all(not p[2] for p in props)
        if fixed:
            dtype = np.dtype([(p[0], "<" + p[1]) for p in props])
            arr = np.frombuffer(body, dtype=dtype, count=count, offset=offset)
            offset += dtype.itemsize * count
            if name == "vertex":
                vertices = np.stack([arr["x"], arr["y"], arr["z"]], axis=1).astype(np.float64)
        else:
            for _ in range(count):
                row_idx = None
                for pname, dtype, is_list, count_dtype in props:
                    if is_list:
                        n = int(np.frombuffer(body, "<" + count_dtype, 1, offset)[0])
                        offset += np.dtype(count_dtype).itemsize
                        idx = np.frombuffer(body, "<" + dtype, n, offset)
                        offset += np.dtype(dtype).itemsize * n
                        row_idx = idx
                    else:
                        offset += np.dtype(dtype).itemsize
                if name == "face" and row_idx is not None:
                    idx = [int(i) for i in row_idx]
                    for k in range(1, len(idx) - 1):
                        faces.append([idx[0], idx[k], idx[k + 1]])
    if vertices is None or not faces:
        raise InputError(f"PLY {path} contains no triangle geometry")
    return vertices, np.array(faces)


def _save_obj(mesh: TriMesh, path: Path) -> None:
    with open(path, "w", encoding="ascii", newline="\n") as fh:
        for v in mesh.vertices:
            fh.write(f"v {float(v[0])!r} {float(v[1])!r} {float(v[2])!r}\n")
        for t in mesh.triangles:
            fh.write(f"f {t[0] + 1} {t[1] + 1} {t[2] + 1}\n")


def _save_ply(mesh: TriMesh, path: Path) -> None:
    with open(path, "wb") as fh:
        fh.write(
            b"ply\nformat ascii 1.0\n"
            + f"element vertex {mesh.n_vertices}\n".encode()
            + b"property double x\nproperty double y\nproperty double z\n"
            + f"element face {mesh.n_triangles}\n".encode()
            + b"property list uchar int vertex_indices\nend_header\n"
        )
        for v in mesh.vertices:
            fh.write(f"{float(v[0])!r} {float(v[1])!r} {float(v[2])!r}\n".encode())
        for t in mesh.triangles:
            fh.write(f"3 {t[0]} {t[1]} {t[2]}\n".encode())
