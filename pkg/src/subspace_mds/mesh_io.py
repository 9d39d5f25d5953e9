"""Triangle meshes and raster images: loading, saving and synthetic generators."""

from __future__ import annotations

import os
from dataclasses import dataclass
from functools import cached_property

import numpy as np

MESH_FORMATS = ("off", "obj")


class MeshFormatError(ValueError):
    pass


class ImageFormatError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class TriangleMesh:
    """Vertices and triangular faces of a discretized surface.

    Parameters
    ----------
    vertices : (N, m) array
        Vertex coordinates, usually m = 3.
    faces : (F, 3) int array
        Vertex indices of each triangle.

    Construction validates the index range and rejects degenerate
    (repeated-index) faces. Arrays are stored read-only.
    """

    vertices: np.ndarray
    faces: np.ndarray

    def __post_init__(self):
        v = np.array(self.vertices, dtype=float)
        f = np.array(self.faces, dtype=np.int64)
        if v.ndim != 2:
            raise ValueError("vertices must be a 2-D array")
        if f.size == 0:
            f = f.reshape(0, 3)
        if f.ndim != 2 or f.shape[1] != 3:
            raise ValueError("faces must be an (F, 3) array")
        n = len(v)
        if f.size and (f.min() < 0 or f.max() >= n):
            bad = int(np.flatnonzero((f < 0).any(1) | (f >= n).any(1))[0])
            raise ValueError(f"face {bad} has a vertex index outside [0, {n})")
        degenerate = (f[:, 0] == f[:, 1]) | (f[:, 1] == f[:, 2]) | (f[:, 0] == f[:, 2])
        if degenerate.any():
            raise ValueError(f"face {int(np.flatnonzero(degenerate)[0])} repeats a vertex index")
        if not np.all(np.isfinite(v)):
            raise ValueError("vertex coordinates must be finite")
        v.setflags(write=False)
        f.setflags(write=False)
        object.__setattr__(self, "vertices", v)
        object.__setattr__(self, "faces", f)

    @property
    def n_vertices(self) -> int:
        return len(self.vertices)

    @property
    def n_faces(self) -> int:
        return len(self.faces)

    @cached_property
    def _edge_faces(self):
        f = self.faces
        e = np.concatenate([f[:, [0, 1]], f[:, [1, 2]], f[:, [2, 0]]])
        e.sort(axis=1)
        edges, counts = np.unique(e, axis=0, return_counts=True)
        return edges.reshape(-1, 2), counts

    @property
    def edges(self) -> np.ndarray:
        """Unique undirected edges as an (E, 2) array with ``i < j``."""
        return self._edge_faces[0]

    @property
    def edge_face_counts(self) -> np.ndarray:
        return self._edge_faces[1]

    @cached_property
    def boundary_flags(self) -> np.ndarray:
        """True for vertices lying on an edge with exactly one incident face."""
        flags = np.zeros(self.n_vertices, dtype=bool)
        edges, counts = self._edge_faces
        flags[edges[counts == 1].ravel()] = True
        flags.setflags(write=False)
        return flags

    def is_manifold(self) -> bool:
        """Every edge is shared by at most two faces."""
        return bool(np.all(self.edge_face_counts <= 2))

    def is_closed(self) -> bool:
        return bool(self.n_faces) and bool(np.all(self.edge_face_counts == 2))

    def content_hash(self) -> str:
        import hashlib

        h = hashlib.sha256()
        h.update(np.ascontiguousarray(self.vertices).tobytes())
        h.update(np.ascontiguousarray(self.faces).tobytes())
        return h.hexdigest()

    def with_vertices(self, vertices) -> "TriangleMesh":
        return TriangleMesh(vertices, self.faces)


def _format_from(path, fmt):
    if fmt is None:
        fmt = os.path.splitext(str(path))[1].lstrip(".")
    fmt = fmt.lower()
    if fmt not in MESH_FORMATS:
        raise MeshFormatError(f"unsupported mesh format {fmt!r}; expected one of {MESH_FORMATS}")
    return fmt


def _content_lines(text):
    for raw in text.splitlines():
        line = raw.split("#", 1)[0].strip()
        if line:
            yield line


def _parse_off(text):
    lines = _content_lines(text)
    try:
        header = next(lines)
    except StopIteration:
        raise MeshFormatError("empty OFF file") from None
    tokens = header.split()
    if tokens[0] != "OFF":
        raise MeshFormatError(f"OFF header expected, got {header!r}")
    tokens = tokens[1:]
    if not tokens:
        tokens = next(lines, "").split()
    try:
        nv, nf = int(tokens[0]), int(tokens[1])
    except (IndexError, ValueError):
        raise MeshFormatError("OFF counts line must give vertex and face counts") from None
    verts, faces = [], []
    for _ in range(nv):
        parts = next(lines, None)
        if parts is None:
            raise MeshFormatError("OFF file ends before all vertices are read")
        try:
            verts.append([float(t) for t in parts.split()[:3]])
        except ValueError:
            raise MeshFormatError(f"bad OFF vertex line {parts!r}") from None
        if len(verts[-1]) != 3:
            raise MeshFormatError(f"OFF vertex line needs three coordinates: {parts!r}")
    for _ in range(nf):
        parts = next(lines, None)
        if parts is None:
            raise MeshFormatError("OFF file ends before all faces are read")
        try:
            ints = [int(t) for t in parts.split()]
        except ValueError:
            raise MeshFormatError(f"bad OFF face line {parts!r}") from None
        if len(ints) < 4 or ints[0] != 3:
            raise MeshFormatError(f"only triangular faces are supported: {parts!r}")
        faces.append(ints[1:4])
    return np.array(verts, dtype=float).reshape(-1, 3), np.array(faces, dtype=np.int64).reshape(-1, 3)


def _parse_obj(text):
    verts, faces = [], []
    for line in _content_lines(text):
        parts = line.split()
        if parts[0] == "v":
            try:
                verts.append([float(t) for t in parts[1:4]])
            except ValueError:
                raise MeshFormatError(f"bad OBJ vertex line {line!r}") from None
            if len(verts[-1]) != 3:
                raise MeshFormatError(f"OBJ vertex line needs three coordinates: {line!r}")
        elif parts[0] == "f":
            if len(parts) != 4:
                raise MeshFormatError(f"only triangular faces are supported: {line!r}")
            face = []
            for tok in parts[1:]:
                try:
                    idx = int(tok.split("/")[0])
                except ValueError:
                    raise MeshFormatError(f"bad OBJ face line {line!r}") from None
                if idx == 0:
                    raise MeshFormatError(f"OBJ indices are 1-based, found 0 in {line!r}")
                # negative indices count back from the most recent vertex
                face.append(idx - 1 if idx > 0 else len(verts) + idx)
            faces.append(face)
    return np.array(verts, dtype=float).reshape(-1, 3), np.array(faces, dtype=np.int64).reshape(-1, 3)


def load_mesh(path, format=None) -> TriangleMesh:
    """Read an OFF or OBJ triangle mesh, preserving vertex order."""
    fmt = _format_from(path, format)
    with open(path) as fh:
        text = fh.read()
    verts, faces = _parse_off(text) if fmt == "off" else _parse_obj(text)
    try:
        return TriangleMesh(verts, faces)
    except ValueError as exc:
        raise MeshFormatError(f"{path}: {exc}") from None


def _coords3(vertices):
    v = np.asarray(vertices, dtype=float)
    if v.shape[1] > 3:
        raise ValueError("only meshes embedded in at most 3 dimensions can be written")
    if v.shape[1] < 3:
        v = np.hstack([v, np.zeros((len(v), 3 - v.shape[1]))])
    return v


def save_mesh(mesh: TriangleMesh, path, format=None) -> None:
    fmt = _format_from(path, format)
    if mesh.n_vertices == 0:
        raise ValueError("refusing to write a mesh with no vertices")
    v = _coords3(mesh.vertices)
    out = []
    if fmt == "off":
        out.append("OFF")
        out.append(f"{mesh.n_vertices} {mesh.n_faces} 0")
        out.extend(" ".join(repr(float(c)) for c in row) for row in v)
        out.extend(f"3 {a} {b} {c}" for a, b, c in mesh.faces)
    else:
        out.extend("v " + " ".join(repr(float(c)) for c in row) for row in v)
        out.extend(f"f {a + 1} {b + 1} {c + 1}" for a, b, c in mesh.faces)
    with open(path, "w") as fh:
        fh.write("\n".join(out) + "\n")


def generate_grid_mesh(rows: int, cols: int, spacing_x: float = 1.0, spacing_y: float = 1.0) -> TriangleMesh:
    """Planar lattice in the z = 0 plane.

    Vertex ``(i, j)`` sits at ``(j * spacing_x, i * spacing_y, 0)`` with index
    ``i * cols + j``; every cell is split along its ``(i, j)-(i+1, j+1)`` diagonal.
    """
    if rows < 2 or cols < 2:
        raise ValueError("grid needs at least 2 rows and 2 columns")
    jj, ii = np.meshgrid(np.arange(cols), np.arange(rows))
    verts = np.column_stack([jj.ravel() * spacing_x, ii.ravel() * spacing_y, np.zeros(rows * cols)])
    idx = np.arange(rows * cols).reshape(rows, cols)
    a = idx[:-1, :-1].ravel()
    b = idx[:-1, 1:].ravel()
    c = idx[1:, 1:].ravel()
    d = idx[1:, :-1].ravel()
    faces = np.concatenate([np.column_stack([a, b, c]), np.column_stack([a, c, d])])
    return TriangleMesh(verts, faces)


_ICOSAHEDRON_FACES = [
    (0, 11, 5), (0, 5, 1), (0, 1, 7), (0, 7, 10), (0, 10, 11),
    (1, 5, 9), (5, 11, 4), (11, 10, 2), (10, 7, 6), (7, 1, 8),
    (3, 9, 4), (3, 4, 2), (3, 2, 6), (3, 6, 8), (3, 8, 9),
    (4, 9, 5), (2, 4, 11), (6, 2, 10), (8, 6, 7), (9, 8, 1),
]


def generate_sphere_mesh(subdivision_level: int = 3) -> TriangleMesh:
    """Icosphere: an icosahedron split ``subdivision_level`` times, projected to the unit sphere."""
    if subdivision_level < 0:
        raise ValueError("subdivision level must be nonnegative")
    t = (1.0 + 5 ** 0.5) / 2.0
    verts = [(-1, t, 0), (1, t, 0), (-1, -t, 0), (1, -t, 0),
             (0, -1, t), (0, 1, t), (0, -1, -t), (0, 1, -t),
             (t, 0, -1), (t, 0, 1), (-t, 0, -1), (-t, 0, 1)]
    verts = [np.array(v, dtype=float) / np.linalg.norm(v) for v in verts]
    faces = list(_ICOSAHEDRON_FACES)
    for _ in range(subdivision_level):
        midpoint = {}

        def mid(a, b):
            key = (a, b) if a < b else (b, a)
            if key not in midpoint:
                m = verts[a] + verts[b]
                verts.append(m / np.linalg.norm(m))
                midpoint[key] = len(verts) - 1
            return midpoint[key]

        new_faces = []
        for a, b, c in faces:
            ab, bc, ca = mid(a, b), mid(b, c), mid(c, a)
            new_faces += [(a, ab, ca), (b, bc, ab), (c, ca, bc), (ab, bc, ca)]
        faces = new_faces
    return TriangleMesh(np.array(verts), np.array(faces))


@dataclass(frozen=True, eq=False)
class RasterImage:
    """Row-major image with intensities in [0, 1]; ``samples`` has shape (height, width, channels)."""

    samples: np.ndarray

    def __post_init__(self):
        s = np.array(self.samples, dtype=float)
        if s.ndim == 2:
            s = s[:, :, None]
        if s.ndim != 3 or s.shape[2] not in (1, 3):
            raise ValueError("image samples must have shape (height, width, 1 or 3)")
        if s.size and (s.min() < 0 or s.max() > 1):
            raise ValueError("image samples must lie in [0, 1]")
        s.setflags(write=False)
        object.__setattr__(self, "samples", s)

    @property
    def height(self) -> int:
        return self.samples.shape[0]

    @property
    def width(self) -> int:
        return self.samples.shape[1]

    @property
    def channels(self) -> int:
        return self.samples.shape[2]

    def quantized(self) -> np.ndarray:
        return np.rint(self.samples * 255).astype(np.int64)


def load_image(path) -> RasterImage:
    """Read a plain (ASCII) PGM ``P2`` or PPM ``P3`` file with maxval 255."""
    with open(path) as fh:
        try:
            text = fh.read()
        except UnicodeDecodeError:
            raise ImageFormatError(f"{path}: binary images are not supported") from None
    tokens = []
    for line in text.splitlines():
        tokens.extend(line.split("#", 1)[0].split())
    if not tokens:
        raise ImageFormatError(f"{path}: empty image file")
    magic = tokens[0]
    if magic not in ("P2", "P3"):
        raise ImageFormatError(f"{path}: only plain PGM (P2) and PPM (P3) are accepted, got {magic!r}")
    try:
        width, height, maxval = (int(t) for t in tokens[1:4])
    except ValueError:
        raise ImageFormatError(f"{path}: malformed header") from None
    if maxval != 255:
        raise ImageFormatError(f"{path}: maxval must be 255, got {maxval}")
    channels = 1 if magic == "P2" else 3
    body = tokens[4:]
    if len(body) != width * height * channels:
        raise ImageFormatError(
            f"{path}: expected {width * height * channels} samples, found {len(body)}")
    values = np.array(body, dtype=np.int64)
    if values.min(initial=0) < 0 or values.max(initial=0) > 255:
        raise ImageFormatError(f"{path}: sample outside [0, 255]")
    return RasterImage(values.reshape(height, width, channels) / 255.0)


def save_image(image: RasterImage, path) -> None:
    magic = "P2" if image.channels == 1 else "P3"
    q = image.quantized().reshape(image.height, -1)
    lines = [magic, f"{image.width} {image.height}", "255"]
    lines.extend(" ".join(map(str, row)) for row in q)
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")
