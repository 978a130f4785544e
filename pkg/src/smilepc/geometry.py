"""Point-cloud and mesh data types, file I/O, surface sampling, and
saliency export.

Coordinate conventions: clouds are (N, 3) float64 arrays.  ``normalize``
moves the centroid to the origin and scales the farthest point to unit
norm; the rest of the pipeline assumes normalized model space.  Arrays held
by the frozen dataclasses are marked read-only so instances are safe to
share across threads.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

SALIENT_RGB = (255, 0, 0)
BASE_RGB = (30, 30, 200)


class OffParseError(ValueError):
    """Malformed OFF input; carries the 1-based offending line number."""

    def __init__(self, line_no: int, message: str):
        super().__init__(f"line {line_no}: {message}")
        self.line_no = line_no


def _freeze(arr: np.ndarray) -> np.ndarray:
    out = np.ascontiguousarray(arr)
    out.setflags(write=False)
    return out


@dataclass(frozen=True)
class PointCloud:
    """Ordered set of 3-D points; immutable after construction."""

    points: np.ndarray

    def __post_init__(self):
        pts = np.ascontiguousarray(self.points, dtype=np.float64)
        if pts.ndim != 2 or pts.shape[1] != 3:
            raise ValueError("points must have shape (N, 3)")
        if pts.shape[0] < 1:
            raise ValueError("point cloud must contain at least one point")
        if not np.all(np.isfinite(pts)):
            raise ValueError("point coordinates must be finite")
        object.__setattr__(self, "points", _freeze(pts))

    @property
    def n(self) -> int:
        return self.points.shape[0]

    def to_json(self) -> str:
        return json.dumps({"points": [[float(v) for v in row] for row in self.points]})

    @classmethod
    def from_json(cls, text: str) -> "PointCloud":
        doc = json.loads(text)
        return cls(np.asarray(doc["points"], dtype=np.float64))


@dataclass(frozen=True)
class TriangleMesh:
    """Triangle soup: (V, 3) float vertices and (F, 3) integer faces."""

    vertices: np.ndarray
    faces: np.ndarray

    def __post_init__(self):
        verts = np.ascontiguousarray(self.vertices, dtype=np.float64)
        faces = np.ascontiguousarray(self.faces, dtype=np.int64)
        if verts.ndim != 2 or verts.shape[1] != 3 or verts.shape[0] < 1:
            raise ValueError("vertices must have shape (V, 3), V >= 1")
        if faces.ndim != 2 or faces.shape[1] != 3 or faces.shape[0] < 1:
            raise ValueError("faces must have shape (F, 3), F >= 1")
        if not np.all(np.isfinite(verts)):
            raise ValueError("vertex coordinates must be finite")
        if faces.min() < 0 or faces.max() >= verts.shape[0]:
            raise ValueError("face index out of range")
        object.__setattr__(self, "vertices", _freeze(verts))
        object.__setattr__(self, "faces", _freeze(faces))

    def triangle_areas(self) -> np.ndarray:
        a = self.vertices[self.faces[:, 0]]
        b = self.vertices[self.faces[:, 1]]
        c = self.vertices[self.faces[:, 2]]
        cross = np.cross(b - a, c - a)
        return 0.5 * np.linalg.norm(cross, axis=1)


@dataclass(frozen=True)
class SaliencyCloud:
    """Point cloud annotated with cluster ids and a per-point salient flag.

    The flag must be constant within each cluster: saliency is a property
    of super-points, not of individual points.
    """

    points: np.ndarray
    cluster_id: np.ndarray
    is_salient: np.ndarray

    def __post_init__(self):
        pts = np.ascontiguousarray(self.points, dtype=np.float64)
        cid = np.ascontiguousarray(self.cluster_id, dtype=np.int64)
        sal = np.ascontiguousarray(self.is_salient, dtype=bool)
        n = pts.shape[0]
        if pts.ndim != 2 or pts.shape[1] != 3 or n < 1:
            raise ValueError("points must have shape (N, 3)")
        if cid.shape != (n,) or sal.shape != (n,):
            raise ValueError("cluster_id and is_salient must have shape (N,)")
        for c in np.unique(cid):
            flags = sal[cid == c]
            if flags.any() and not flags.all():
                raise ValueError(f"is_salient is not constant within cluster {c}")
        object.__setattr__(self, "points", _freeze(pts))
        object.__setattr__(self, "cluster_id", _freeze(cid))
        object.__setattr__(self, "is_salient", _freeze(sal))

    @property
    def n(self) -> int:
        return self.points.shape[0]


def _content_lines(path):
    """Yield (line_no, tokens) for non-empty lines with comments stripped."""
    with open(path, encoding="utf-8") as fh:
        for line_no, raw in enumerate(fh, start=1):
            text = raw.split("#", 1)[0].strip()
            if text:
                yield line_no, text.split()


def read_off(path) -> TriangleMesh:
    """Parse an OFF mesh, fan-triangulating polygonal faces.

    Tolerates the dialect where the counts ride on the header line
    ("OFF4 2 0" or "OFF 4 2 0").  Polygon faces with k > 3 vertices become
    k - 2 fan triangles, so the triangle count can exceed the declared face
    count.  Raises OffParseError with the offending line number.
    """
    stream = _content_lines(path)
    try:
        line_no, tokens = next(stream)
    except StopIteration:
        raise OffParseError(1, "empty OFF file") from None
    if not tokens[0].upper().startswith("OFF"):
        raise OffParseError(line_no, f"expected OFF header, got {tokens[0]!r}")
    rest = tokens[0][3:]
    counts = ([rest] if rest else []) + tokens[1:]
    if not counts:
        try:
            line_no, counts = next(stream)
        except StopIteration:
            raise OffParseError(line_no, "missing count line after OFF header") from None
    if len(counts) < 3:
        raise OffParseError(line_no, "count line needs vertex, face and edge counts")
    try:
        n_vertices, n_faces = int(counts[0]), int(counts[1])
    except ValueError:
        raise OffParseError(line_no, f"bad counts: {' '.join(counts[:3])}") from None
    if n_vertices < 1 or n_faces < 0:
        raise OffParseError(line_no, f"invalid counts: {n_vertices} vertices, {n_faces} faces")

    vertices = np.empty((n_vertices, 3), dtype=np.float64)
    for i in range(n_vertices):
        try:
            line_no, tokens = next(stream)
        except StopIteration:
            raise OffParseError(line_no + 1, f"expected {n_vertices} vertex lines, got {i}") from None
        if len(tokens) < 3:
            raise OffParseError(line_no, "vertex line needs 3 coordinates")
        try:
            vertices[i] = [float(t) for t in tokens[:3]]
        except ValueError:
            raise OffParseError(line_no, f"bad vertex coordinate in {' '.join(tokens[:3])!r}") from None

    triangles = []
    for i in range(n_faces):
        try:
            line_no, tokens = next(stream)
        except StopIteration:
            raise OffParseError(line_no + 1, f"expected {n_faces} face lines, got {i}") from None
        try:
            k = int(tokens[0])
            idx = [int(t) for t in tokens[1 : 1 + k]]
        except ValueError:
            raise OffParseError(line_no, f"bad face line {' '.join(tokens)!r}") from None
        if k < 3 or len(idx) < k:
            raise OffParseError(line_no, f"face needs at least 3 vertex indices, got {tokens[0]}")
        for v in idx:
            if not 0 <= v < n_vertices:
                raise OffParseError(line_no, f"vertex index {v} out of range [0, {n_vertices})")
        for t in range(1, k - 1):  # fan triangulation
            triangles.append((idx[0], idx[t], idx[t + 1]))
    if not triangles:
        raise OffParseError(line_no, "mesh declares no faces")
    return TriangleMesh(vertices, np.asarray(triangles, dtype=np.int64))


def write_off(mesh: TriangleMesh, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("OFF\n")
        fh.write(f"{mesh.vertices.shape[0]} {mesh.faces.shape[0]} 0\n")
        for x, y, z in mesh.vertices:
            fh.write(f"{float(x)!r} {float(y)!r} {float(z)!r}\n")
        for a, b, c in mesh.faces:
            fh.write(f"3 {a} {b} {c}\n")


def read_xyz(path) -> PointCloud:
    """Whitespace-separated x y z per line; '#' starts a comment."""
    rows = []
    for line_no, tokens in _content_lines(path):
        if len(tokens) < 3:
            raise ValueError(f"line {line_no}: expected 3 coordinates, got {len(tokens)}")
        try:
            rows.append([float(t) for t in tokens[:3]])
        except ValueError:
            raise ValueError(f"line {line_no}: bad coordinate in {' '.join(tokens[:3])!r}") from None
    if not rows:
        raise ValueError("no points in file")
    return PointCloud(np.asarray(rows, dtype=np.float64))


def write_xyz(cloud: PointCloud, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for x, y, z in cloud.points:
            fh.write(f"{float(x)!r} {float(y)!r} {float(z)!r}\n")


def read_cloud_json(path) -> PointCloud:
    with open(path, encoding="utf-8") as fh:
        return PointCloud.from_json(fh.read())


def write_cloud_json(cloud: PointCloud, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(cloud.to_json())
        fh.write("\n")


def sample_mesh(mesh: TriangleMesh, n: int, seed: int) -> PointCloud:
    """Draw n points on the mesh surface, area-weighted, uniform barycentric.

    Triangles are chosen proportionally to area; within a triangle the
    point is uniform via the reflected-parallelogram trick.  Deterministic
    for a fixed seed.
    """
    if n < 1:
        raise ValueError("need at least one sample")
    areas = mesh.triangle_areas()
    total = float(areas.sum())
    if total <= 0.0:
        raise ValueError("mesh has zero total surface area")
    rng = np.random.default_rng(seed)
    cum = np.cumsum(areas)
    cum /= cum[-1]
    tri = np.searchsorted(cum, rng.random(n), side="right")
    u = rng.random(n)
    w = rng.random(n)
    flip = u + w > 1.0
    u[flip] = 1.0 - u[flip]
    w[flip] = 1.0 - w[flip]
    a = mesh.vertices[mesh.faces[tri, 0]]
    b = mesh.vertices[mesh.faces[tri, 1]]
    c = mesh.vertices[mesh.faces[tri, 2]]
    pts = a + u[:, None] * (b - a) + w[:, None] * (c - a)
    return PointCloud(pts)


def normalize(cloud: PointCloud) -> PointCloud:
    """Center the centroid at the origin and scale the max norm to 1.

    A degenerate cloud (all points coincident) is centered and left at
    scale 1.  Idempotent to within accumulation error (~1e-12).
    """
    centered = cloud.points - cloud.points.mean(axis=0)
    scale = float(np.linalg.norm(centered, axis=1).max())
    if scale > 0.0:
        centered = centered / scale
    return PointCloud(centered)


def write_saliency_ply(sal: SaliencyCloud, path) -> None:
    """ASCII PLY with per-vertex colors: salient red, the rest blue."""
    lines = [
        "ply",
        "format ascii 1.0",
        f"element vertex {sal.n}",
        "property float x",
        "property float y",
        "property float z",
        "property uchar red",
        "property uchar green",
        "property uchar blue",
        "end_header",
    ]
    for (x, y, z), hot in zip(sal.points, sal.is_salient):
        r, g, b = SALIENT_RGB if hot else BASE_RGB
        lines.append(f"{float(x)!r} {float(y)!r} {float(z)!r} {r} {g} {b}")
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(lines))
        fh.write("\n")
