"""Triangle mesh ingestion from STL files plus rigid transforms.

Meshes are centered at their surface centroid on load (translational motion
is assumed perfectly compensated downstream, so only the rotational aspect
matters) and vertices are snapped to the float32 grid so that a binary STL
round trip reproduces them exactly.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field

import numpy as np

# STL binary record: normal (3f), three vertices (9f), attribute count (u16).
_STL_RECORD = np.dtype([
    ("normal", "<f4", (3,)),
    ("verts", "<f4", (3, 3)),
    ("attr", "<u2"),
])
_STL_HEADER_BYTES = 80
_MIN_TRIANGLE_AREA = 1e-12


class StlError(ValueError):
    """Malformed or truncated STL content."""


@dataclass(frozen=True)
class TriangleMesh:
    """Indexed triangle mesh with per-facet unit normals.

    vertices are float64 (meters), triangles are int32 index triples and
    normals are unit facet normals agreeing with the winding orientation.
    """

    vertices: np.ndarray
    triangles: np.ndarray
    normals: np.ndarray
    dropped_degenerate: int = 0

    def __post_init__(self):
        v = np.asarray(self.vertices, dtype=np.float64)
        t = np.asarray(self.triangles, dtype=np.int32)
        n = np.asarray(self.normals, dtype=np.float64)
        object.__setattr__(self, "vertices", v)
        object.__setattr__(self, "triangles", t)
        object.__setattr__(self, "normals", n)
        if t.ndim != 2 or t.shape[1] != 3 or len(t) < 1:
            raise ValueError("mesh needs at least one triangle")
        if v.ndim != 2 or v.shape[1] != 3:
            raise ValueError("vertices must be an (N, 3) array")
        if not np.isfinite(v).all():
            raise ValueError("non-finite vertex coordinate")
        if t.min() < 0 or t.max() >= len(v):
            raise ValueError("triangle index out of range")
        areas = self.areas
        if (areas <= _MIN_TRIANGLE_AREA).any():
            raise ValueError("zero-area triangle in mesh")
        lengths = np.linalg.norm(n, axis=1)
        if (np.abs(lengths - 1.0) > 1e-6).any():
            raise ValueError("facet normal not unit length")
        wind = self._winding_normals()
        if (np.einsum("ij,ij->i", n, wind) < 0.0).any():
            raise ValueError("facet normal opposes winding orientation")

    # -- derived quantities ------------------------------------------------

    def _corners(self):
        return (self.vertices[self.triangles[:, 0]],
                self.vertices[self.triangles[:, 1]],
                self.vertices[self.triangles[:, 2]])

    def _winding_normals(self):
        a, b, c = self._corners()
        cross = np.cross(b - a, c - a)
        norm = np.linalg.norm(cross, axis=1, keepdims=True)
        return cross / np.maximum(norm, 1e-300)

    @property
    def triangle_count(self) -> int:
        return len(self.triangles)

    @property
    def areas(self) -> np.ndarray:
        a, b, c = self._corners()
        return 0.5 * np.linalg.norm(np.cross(b - a, c - a), axis=1)

    @property
    def surface_area(self) -> float:
        return float(self.areas.sum())

    @property
    def centroid(self) -> np.ndarray:
        """Area-weighted centroid of the surface."""
        a, b, c = self._corners()
        tri_centers = (a + b + c) / 3.0
        w = self.areas
        return (tri_centers * w[:, None]).sum(axis=0) / w.sum()

    @property
    def bounds(self) -> tuple[np.ndarray, np.ndarray]:
        return self.vertices.min(axis=0), self.vertices.max(axis=0)

    @property
    def bounding_radius(self) -> float:
        return float(np.linalg.norm(self.vertices, axis=1).max())

    # -- transforms --------------------------------------------------------

    def scaled(self, factor: float) -> "TriangleMesh":
        if not np.isfinite(factor) or factor <= 0:
            raise ValueError("scale factor must be positive and finite")
        return TriangleMesh(self.vertices * factor, self.triangles, self.normals,
                            self.dropped_degenerate)

    def to_stl_bytes(self) -> bytes:
        """Serialize as little-endian binary STL."""
        records = np.zeros(self.triangle_count, dtype=_STL_RECORD)
        records["normal"] = self.normals.astype("<f4")
        a, b, c = self._corners()
        records["verts"][:, 0] = a.astype("<f4")
        records["verts"][:, 1] = b.astype("<f4")
        records["verts"][:, 2] = c.astype("<f4")
        header = b"isarsim binary STL".ljust(_STL_HEADER_BYTES, b"\x00")
        return header + struct.pack("<I", self.triangle_count) + records.tobytes()


def rotate_mesh(mesh: TriangleMesh, yaw_deg: float) -> TriangleMesh:
    """Rotate a mesh about the vertical axis through its centroid."""
    if not np.isfinite(yaw_deg):
        raise ValueError("yaw angle must be finite")
    ang = np.deg2rad(float(yaw_deg))
    ca, sa = np.cos(ang), np.sin(ang)
    rot = np.array([[ca, -sa, 0.0], [sa, ca, 0.0], [0.0, 0.0, 1.0]])
    c = mesh.centroid
    verts = (mesh.vertices - c) @ rot.T + c
    normals = mesh.normals @ rot.T
    return TriangleMesh(verts, mesh.triangles, normals, mesh.dropped_degenerate)


def load_stl(data: bytes) -> TriangleMesh:
    """Parse binary or ASCII STL bytes into a centered TriangleMesh.

    Degenerate (near zero area) facets are dropped and counted; facet
    normals are recomputed from the winding whenever the stored normal is
    zero or disagrees with the winding orientation.
    """
    if not isinstance(data, (bytes, bytearray, memoryview)):
        raise TypeError("load_stl expects raw file bytes")
    data = bytes(data)
    tris, file_normals = _parse_stl(data)
    return mesh_from_soup(tris, file_normals)


def mesh_from_soup(tris: np.ndarray, file_normals: np.ndarray | None = None,
                   center: bool = True) -> TriangleMesh:
    """Build a welded, centered mesh from a (T, 3, 3) triangle soup."""
    tris = np.asarray(tris, dtype=np.float64)
    if tris.ndim != 3 or tris.shape[1:] != (3, 3):
        raise ValueError("triangle soup must have shape (T, 3, 3)")
    if not np.isfinite(tris).all():
        raise StlError("non-finite coordinate in STL data")

    cross = np.cross(tris[:, 1] - tris[:, 0], tris[:, 2] - tris[:, 0])
    cross_norm = np.linalg.norm(cross, axis=1)
    keep = cross_norm > 2.0 * _MIN_TRIANGLE_AREA
    dropped = int((~keep).sum())
    if not keep.any():
        raise StlError("all triangles are degenerate")
    tris = tris[keep]
    wind = cross[keep] / cross_norm[keep, None]

    if file_normals is not None:
        fn = np.asarray(file_normals, dtype=np.float64)[keep]
        ln = np.linalg.norm(fn, axis=1)
        ok = ln > 1e-12
        fn[ok] /= ln[ok, None]
        # trust the file normal only when it is usable and winding-consistent
        agree = ok & (np.einsum("ij,ij->i", fn, wind) > 0.0)
        normals = np.where(agree[:, None], fn, wind)
    else:
        normals = wind

    if center:
        w = 0.5 * cross_norm[keep]
        centroid = (tris.mean(axis=1) * w[:, None]).sum(axis=0) / w.sum()
        extent = tris.reshape(-1, 3).max(axis=0) - tris.reshape(-1, 3).min(axis=0)
        diag = float(np.linalg.norm(extent))
        # skip the translation when already centered, so reloading a
        # serialized mesh reproduces its vertices bit for bit
        if np.linalg.norm(centroid) > 1e-6 * max(diag, 1.0):
            tris = tris - centroid

    # snap to float32 grid: STL stores f32, keeps round trips exact
    flat = tris.reshape(-1, 3).astype(np.float32).astype(np.float64)
    vertices, index = np.unique(flat, axis=0, return_inverse=True)
    triangles = np.asarray(index).reshape(-1, 3).astype(np.int32)
    return TriangleMesh(vertices, triangles, normals, dropped)


def _parse_stl(data: bytes) -> tuple[np.ndarray, np.ndarray]:
    if _looks_binary(data):
        return _parse_binary(data)
    if data.lstrip()[:5].lower() == b"solid":
        return _parse_ascii(data)
    return _parse_binary(data)


def _looks_binary(data: bytes) -> bool:
    if len(data) < _STL_HEADER_BYTES + 4:
        return False
    (count,) = struct.unpack_from("<I", data, _STL_HEADER_BYTES)
    expected = _STL_HEADER_BYTES + 4 + 50 * count
    if len(data) == expected:
        return True
    # an ASCII file is never an exact binary fit; treat "solid" prefix as text
    return data.lstrip()[:5].lower() != b"solid"


def _parse_binary(data: bytes) -> tuple[np.ndarray, np.ndarray]:
    if len(data) < _STL_HEADER_BYTES + 4:
        raise StlError("truncated STL: missing header")
    (count,) = struct.unpack_from("<I", data, _STL_HEADER_BYTES)
    if count == 0:
        raise StlError("STL declares zero triangles")
    body = data[_STL_HEADER_BYTES + 4:]
    if len(body) < 50 * count:
        raise StlError(
            f"truncated STL: {count} triangles declared, "
            f"{len(body) // 50} present")
    records = np.frombuffer(body[:50 * count], dtype=_STL_RECORD)
    return records["verts"].astype(np.float64), records["normal"].astype(np.float64)


def _parse_ascii(data: bytes) -> tuple[np.ndarray, np.ndarray]:
    try:
        text = data.decode("utf-8", errors="replace")
    except Exception as exc:  # pragma: no cover
        raise StlError("undecodable ASCII STL") from exc
    tokens = text.split()
    tris, normals = [], []
    i = 0
    n = len(tokens)
    current_normal = None
    vert_buf: list[list[float]] = []
    while i < n:
        tok = tokens[i].lower()
        if tok == "facet":
            if i + 4 >= n or tokens[i + 1].lower() != "normal":
                raise StlError("malformed facet statement in ASCII STL")
            current_normal = _floats(tokens[i + 2:i + 5])
            vert_buf = []
            i += 5
        elif tok == "vertex":
            if i + 3 >= n:
                raise StlError("truncated vertex in ASCII STL")
            vert_buf.append(_floats(tokens[i + 1:i + 4]))
            i += 4
        elif tok == "endfacet":
            if len(vert_buf) != 3:
                raise StlError("facet does not have exactly three vertices")
            tris.append(vert_buf)
            normals.append(current_normal if current_normal else [0.0, 0.0, 0.0])
            i += 1
        else:
            i += 1
    if not tris:
        raise StlError("no facets found in ASCII STL")
    return np.asarray(tris, dtype=np.float64), np.asarray(normals, dtype=np.float64)


def _floats(toks) -> list[float]:
    try:
        return [float(t) for t in toks]
    except ValueError as exc:
        raise StlError(f"bad numeric literal in ASCII STL: {toks!r}") from exc
