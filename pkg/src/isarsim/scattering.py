"""Specular multi-bounce ray tracing with shadowing for one radar pose.

A uniform (deterministically jittered) grid of parallel rays is launched
from the radar direction across the target's projected bounding box. Each
ray reflects specularly up to max_bounces times; a bounce contributes a
return when its outgoing direction falls inside an exit cone around the
back-to-radar direction and the return path is unoccluded. Amplitude is
ray-footprint area times |cos| of the incidence angle at the final bounce;
path lengths use the far-field (plane wave) leg convention.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from numba import njit

from .mesh import TriangleMesh

_DET_EPS = 1e-14
_BARY_EPS = 1e-10
_LEAF_SIZE = 4
_MAX_DEPTH = 48


@dataclass(frozen=True)
class RaySpec:
    """Ray-grid density and bounce budget for the tracer."""

    rays_per_axis: int = 64
    max_bounces: int = 3
    wavelength_m: float = 0.0299792458

    def __post_init__(self):
        if int(self.rays_per_axis) != self.rays_per_axis or self.rays_per_axis < 8:
            raise ValueError("rays_per_axis must be an integer >= 8")
        if self.max_bounces not in (1, 2, 3):
            raise ValueError("max_bounces must be 1, 2 or 3")
        if not self.wavelength_m > 0:
            raise ValueError("wavelength must be positive")
        object.__setattr__(self, "rays_per_axis", int(self.rays_per_axis))
        object.__setattr__(self, "max_bounces", int(self.max_bounces))

    @property
    def exit_cone_rad(self) -> float:
        """Half-angle of the exit cone; widens with coarser ray grids."""
        return math.atan(1.0 / self.rays_per_axis) + math.radians(2.0)


@dataclass(frozen=True)
class ScatterReturn:
    """One specular return: two-way path, footprint amplitude, bounce depth."""

    path_length_m: float
    amplitude: float
    bounce_count: int


def radar_direction(azimuth_deg: float, elevation_deg: float) -> np.ndarray:
    """Unit vector from the target center toward the radar (z up)."""
    az = math.radians(azimuth_deg)
    el = math.radians(elevation_deg)
    return np.array([math.cos(el) * math.cos(az),
                     math.cos(el) * math.sin(az),
                     math.sin(el)])


class Bvh:
    """Flat binary AABB tree over mesh triangles for ray queries."""

    def __init__(self, mesh: TriangleMesh):
        tri = mesh.vertices[mesh.triangles]  # (T, 3, 3)
        t = len(tri)
        lo = tri.min(axis=1)
        hi = tri.max(axis=1)
        centers = tri.mean(axis=1)

        order = np.empty(t, dtype=np.int64)
        node_min, node_max = [], []
        node_left, node_right, node_count = [], [], []
        cursor = [0]

        def build(idx: np.ndarray, depth: int) -> int:
            me = len(node_min)
            node_min.append(lo[idx].min(axis=0))
            node_max.append(hi[idx].max(axis=0))
            node_left.append(0)
            node_right.append(-1)
            node_count.append(0)
            if len(idx) <= _LEAF_SIZE or depth >= _MAX_DEPTH:
                node_left[me] = cursor[0]
                node_count[me] = len(idx)
                order[cursor[0]:cursor[0] + len(idx)] = idx
                cursor[0] += len(idx)
                return me
            c = centers[idx]
            axis = int(np.argmax(c.max(axis=0) - c.min(axis=0)))
            half = len(idx) // 2
            part = idx[np.argsort(c[:, axis], kind="stable")]
            node_left[me] = build(part[:half], depth + 1)
            node_right[me] = build(part[half:], depth + 1)
            return me

        build(np.arange(t, dtype=np.int64), 0)

        self.node_min = np.asarray(node_min)
        self.node_max = np.asarray(node_max)
        self.node_left = np.asarray(node_left, dtype=np.int64)
        self.node_right = np.asarray(node_right, dtype=np.int64)
        self.node_count = np.asarray(node_count, dtype=np.int64)
        # triangles reordered so leaves address contiguous ranges
        self.orig_index = order.copy()
        self.v0 = np.ascontiguousarray(tri[order, 0])
        self.e1 = np.ascontiguousarray(tri[order, 1] - tri[order, 0])
        self.e2 = np.ascontiguousarray(tri[order, 2] - tri[order, 0])
        cross = np.cross(self.e1, self.e2)
        self.tn = cross / np.linalg.norm(cross, axis=1, keepdims=True)

    def _arrays(self):
        return (self.node_min, self.node_max, self.node_left, self.node_right,
                self.node_count, self.v0, self.e1, self.e2)

    def nearest_hit(self, origin, direction, t_min: float = 0.0):
        """Nearest intersection along the ray, or (inf, -1) on a miss.

        The returned triangle index refers to the source mesh ordering.
        """
        o = np.asarray(origin, dtype=np.float64)
        d = np.asarray(direction, dtype=np.float64)
        t, tri = _nearest_hit(*self._arrays(), o, d, t_min)
        if tri < 0:
            return math.inf, -1
        return float(t), int(self.orig_index[tri])

    def any_hit(self, origin, direction, t_min: float = 1e-9) -> bool:
        o = np.asarray(origin, dtype=np.float64)
        d = np.asarray(direction, dtype=np.float64)
        return bool(_any_hit(*self._arrays(), o, d, t_min))


def build_bvh(mesh: TriangleMesh) -> Bvh:
    """Build the ray-query acceleration structure for a mesh."""
    return Bvh(mesh)


def brute_force_nearest_hit(mesh: TriangleMesh, origin, direction, t_min: float = 0.0):
    """Reference all-triangles scan; oracle for the BVH nearest-hit result."""
    o = np.asarray(origin, dtype=np.float64)
    d = np.asarray(direction, dtype=np.float64)
    tri = mesh.vertices[mesh.triangles]
    e1 = tri[:, 1] - tri[:, 0]
    e2 = tri[:, 2] - tri[:, 0]
    pvec = np.cross(d[None, :], e2)
    det = np.einsum("ij,ij->i", e1, pvec)
    ok = np.abs(det) > _DET_EPS
    inv = np.where(ok, 1.0 / np.where(ok, det, 1.0), 0.0)
    tvec = o[None, :] - tri[:, 0]
    u = np.einsum("ij,ij->i", tvec, pvec) * inv
    qvec = np.cross(tvec, e1)
    v = (qvec @ d) * inv
    t = np.einsum("ij,ij->i", e2, qvec) * inv
    ok &= (u >= -_BARY_EPS) & (v >= -_BARY_EPS) & (u + v <= 1.0 + _BARY_EPS) & (t > t_min)
    if not ok.any():
        return math.inf, -1
    idx = np.where(ok)[0]
    best = idx[np.argmin(t[idx])]
    return float(t[best]), int(best)


# -- numba kernels ---------------------------------------------------------

@njit(cache=True)
def _tri_hit(v0, e1, e2, i, o, d, t_min):
    """Moller-Trumbore, two sided. Returns hit distance or inf."""
    px = d[1] * e2[i, 2] - d[2] * e2[i, 1]
    py = d[2] * e2[i, 0] - d[0] * e2[i, 2]
    pz = d[0] * e2[i, 1] - d[1] * e2[i, 0]
    det = e1[i, 0] * px + e1[i, 1] * py + e1[i, 2] * pz
    if abs(det) < _DET_EPS:
        return np.inf
    inv = 1.0 / det
    tx = o[0] - v0[i, 0]
    ty = o[1] - v0[i, 1]
    tz = o[2] - v0[i, 2]
    u = (tx * px + ty * py + tz * pz) * inv
    if u < -_BARY_EPS or u > 1.0 + _BARY_EPS:
        return np.inf
    qx = ty * e1[i, 2] - tz * e1[i, 1]
    qy = tz * e1[i, 0] - tx * e1[i, 2]
    qz = tx * e1[i, 1] - ty * e1[i, 0]
    v = (d[0] * qx + d[1] * qy + d[2] * qz) * inv
    if v < -_BARY_EPS or u + v > 1.0 + _BARY_EPS:
        return np.inf
    t = (e2[i, 0] * qx + e2[i, 1] * qy + e2[i, 2] * qz) * inv
    if t <= t_min:
        return np.inf
    return t


@njit(cache=True)
def _box_hit(bmin, bmax, n, o, d, t_max):
    tlo = 0.0
    thi = t_max
    for ax in range(3):
        dax = d[ax]
        if abs(dax) < 1e-300:
            if o[ax] < bmin[n, ax] or o[ax] > bmax[n, ax]:
                return False
        else:
            inv = 1.0 / dax
            t1 = (bmin[n, ax] - o[ax]) * inv
            t2 = (bmax[n, ax] - o[ax]) * inv
            if t1 > t2:
                t1, t2 = t2, t1
            if t1 > tlo:
                tlo = t1
            if t2 < thi:
                thi = t2
            if tlo > thi:
                return False
    return True


@njit(cache=True)
def _nearest_hit(bmin, bmax, left, right, count, v0, e1, e2, o, d, t_min):
    stack = np.empty(2 * _MAX_DEPTH, dtype=np.int64)
    sp = 0
    stack[sp] = 0
    sp += 1
    best_t = np.inf
    best_tri = -1
    while sp > 0:
        sp -= 1
        n = stack[sp]
        if not _box_hit(bmin, bmax, n, o, d, best_t):
            continue
        if count[n] > 0:
            first = left[n]
            for i in range(first, first + count[n]):
                t = _tri_hit(v0, e1, e2, i, o, d, t_min)
                if t < best_t:
                    best_t = t
                    best_tri = i
        else:
            stack[sp] = left[n]
            sp += 1
            stack[sp] = right[n]
            sp += 1
    return best_t, best_tri


@njit(cache=True)
def _any_hit(bmin, bmax, left, right, count, v0, e1, e2, o, d, t_min):
    stack = np.empty(2 * _MAX_DEPTH, dtype=np.int64)
    sp = 0
    stack[sp] = 0
    sp += 1
    while sp > 0:
        sp -= 1
        n = stack[sp]
        if not _box_hit(bmin, bmax, n, o, d, np.inf):
            continue
        if count[n] > 0:
            first = left[n]
            for i in range(first, first + count[n]):
                if _tri_hit(v0, e1, e2, i, o, d, t_min) < np.inf:
                    return True
        else:
            stack[sp] = left[n]
            sp += 1
            stack[sp] = right[n]
            sp += 1
    return False


@njit(cache=True)
def _trace_kernel(bmin, bmax, left, right, count, v0, e1, e2, tn,
                  origins, dir0, d_rad, slant, cell_area, max_b,
                  cone_cos, geo_eps, shadowing,
                  out_amp, out_path, out_hits):
    m = origins.shape[0]
    for r in range(m):
        ox = origins[r, 0]
        oy = origins[r, 1]
        oz = origins[r, 2]
        o = np.empty(3)
        d = np.empty(3)
        o[0], o[1], o[2] = ox, oy, oz
        d[0], d[1], d[2] = dir0[0], dir0[1], dir0[2]
        legs = 0.0
        first_proj = 0.0
        for b in range(max_b):
            t, tri = _nearest_hit(bmin, bmax, left, right, count, v0, e1, e2,
                                  o, d, 1e-12 if b == 0 else geo_eps)
            if tri < 0:
                break
            hx = o[0] + t * d[0]
            hy = o[1] + t * d[1]
            hz = o[2] + t * d[2]
            if b == 0:
                first_proj = hx * d_rad[0] + hy * d_rad[1] + hz * d_rad[2]
            else:
                legs += t
            nx = tn[tri, 0]
            ny = tn[tri, 1]
            nz = tn[tri, 2]
            dn = d[0] * nx + d[1] * ny + d[2] * nz
            if dn > 0.0:  # orient the normal against the incoming ray
                nx, ny, nz = -nx, -ny, -nz
                dn = -dn
            cos_inc = -dn
            rx = d[0] - 2.0 * dn * nx
            ry = d[1] - 2.0 * dn * ny
            rz = d[2] - 2.0 * dn * nz
            rn = math.sqrt(rx * rx + ry * ry + rz * rz)
            rx /= rn
            ry /= rn
            rz /= rn
            out_hits[r, b, 0] = hx
            out_hits[r, b, 1] = hy
            out_hits[r, b, 2] = hz
            exit_cos = rx * d_rad[0] + ry * d_rad[1] + rz * d_rad[2]
            if exit_cos >= cone_cos:
                blocked = False
                if shadowing:
                    so = np.empty(3)
                    so[0] = hx + nx * geo_eps
                    so[1] = hy + ny * geo_eps
                    so[2] = hz + nz * geo_eps
                    blocked = _any_hit(bmin, bmax, left, right, count,
                                       v0, e1, e2, so, d_rad, geo_eps)
                if not blocked:
                    last_proj = hx * d_rad[0] + hy * d_rad[1] + hz * d_rad[2]
                    out_path[r, b] = (slant - first_proj) + legs + (slant - last_proj)
                    out_amp[r, b] = cell_area * cos_inc
            o[0] = hx + nx * geo_eps
            o[1] = hy + ny * geo_eps
            o[2] = hz + nz * geo_eps
            d[0], d[1], d[2] = rx, ry, rz


# -- tracing entry points --------------------------------------------------

class TraceField:
    """Raw per-ray trace output: (rays, bounces) grids plus hit chains."""

    __slots__ = ("amp", "path", "hits", "cell_area", "d_radar", "slant_range")

    def __init__(self, amp, path, hits, cell_area, d_radar, slant_range):
        self.amp = amp
        self.path = path
        self.hits = hits
        self.cell_area = cell_area
        self.d_radar = d_radar
        self.slant_range = slant_range

    def compact(self):
        """(paths, amplitudes, bounce_counts) for contributing bounces,
        ordered by ray index then bounce."""
        mask = self.amp > 0.0
        rays, bounces = np.nonzero(mask)
        return self.path[rays, bounces], self.amp[rays, bounces], (bounces + 1)


def trace_field(mesh: TriangleMesh, pose, spec: RaySpec, *, seed: int = 0,
                shadowing: bool = True, bvh: Bvh | None = None) -> TraceField:
    """Trace the full ray grid for one pose and return the raw field."""
    if bvh is None:
        bvh = Bvh(mesh)
    n = spec.rays_per_axis
    d_rad = radar_direction(pose.azimuth_deg, pose.elevation_deg)
    az = math.radians(pose.azimuth_deg)
    g1 = np.array([-math.sin(az), math.cos(az), 0.0])
    g2 = np.cross(d_rad, g1)

    verts = mesh.vertices
    p1 = verts @ g1
    p2 = verts @ g2
    pd = verts @ d_rad
    lo, hi = mesh.bounds
    diag = float(np.linalg.norm(hi - lo))
    pad1 = 0.02 * (p1.max() - p1.min()) + 1e-9
    pad2 = 0.02 * (p2.max() - p2.min()) + 1e-9
    lo1, hi1 = p1.min() - pad1, p1.max() + pad1
    lo2, hi2 = p2.min() - pad2, p2.max() + pad2
    cell1 = (hi1 - lo1) / n
    cell2 = (hi2 - lo2) / n

    rng = np.random.Generator(np.random.Philox(key=np.uint64(seed)))
    jitter = rng.random((n, n, 2)) - 0.5
    ii, jj = np.meshgrid(np.arange(n), np.arange(n), indexing="ij")
    a = lo1 + (ii + 0.5 + jitter[..., 0]) * cell1
    b = lo2 + (jj + 0.5 + jitter[..., 1]) * cell2
    launch = pd.max() + 0.5 * diag + 1e-3
    origins = (a.reshape(-1, 1) * g1 + b.reshape(-1, 1) * g2 + launch * d_rad)

    geo_eps = 1e-7 * max(diag, 1e-3)
    out_amp = np.zeros((n * n, spec.max_bounces))
    out_path = np.zeros((n * n, spec.max_bounces))
    out_hits = np.full((n * n, spec.max_bounces, 3), np.nan)
    _trace_kernel(*bvh._arrays(), bvh.tn,
                  np.ascontiguousarray(origins), -d_rad, d_rad,
                  float(pose.slant_range_m), float(cell1 * cell2),
                  spec.max_bounces, math.cos(spec.exit_cone_rad), geo_eps,
                  shadowing, out_amp, out_path, out_hits)
    return TraceField(out_amp, out_path, out_hits, float(cell1 * cell2),
                      d_rad, float(pose.slant_range_m))


def trace_returns(mesh: TriangleMesh, pose, spec: RaySpec, *, seed: int = 0,
                  shadowing: bool = True, bvh: Bvh | None = None) -> list[ScatterReturn]:
    """All specular returns for one radar pose, ordered by ray index."""
    field = trace_field(mesh, pose, spec, seed=seed, shadowing=shadowing, bvh=bvh)
    paths, amps, bounces = field.compact()
    return [ScatterReturn(float(p), float(a), int(b))
            for p, a, b in zip(paths, amps, bounces)]
