"""Procedural target meshes: canonical reflectors, a 6400-face calibration
target, and seven parametric fighter models.

All builders return validated TriangleMesh objects, so they double as STL
sources (mesh.to_stl_bytes) for the command line. Reflector primitives are
built in canonical orientations: broadside faces point along +x, fold and
symmetry axes follow the comments on each builder.
"""

from __future__ import annotations

import math

import numpy as np

from .mesh import TriangleMesh, mesh_from_soup

SLICY_FOOTPRINT_M = (2.445, 2.75)
SLICY_BOX_HEIGHT_M = 0.765
SLICY_CYLINDER_HEIGHT_M = 0.915
SLICY_FACE_COUNT = 6400


def _quad(p0, p1, p2, p3) -> list:
    """Two triangles covering the quad p0-p1-p2-p3 (given in loop order)."""
    return [[p0, p1, p2], [p0, p2, p3]]


def _soup(tris, *, center: bool = False) -> TriangleMesh:
    return mesh_from_soup(np.asarray(tris, dtype=np.float64), None, center=center)


def flat_plate(width: float = 1.0, height: float = 1.0) -> TriangleMesh:
    """Rectangle in the y-z plane facing +x, centered at the origin."""
    w, h = width / 2.0, height / 2.0
    return _soup(_quad([0, -w, -h], [0, w, -h], [0, w, h], [0, -w, h]))


def dihedral(width: float = 1.0, height: float = 1.0) -> TriangleMesh:
    """Two plates meeting at 90 degrees along the z axis, opening toward +x.

    Retro-reflective in azimuth around 0 degrees when viewed near zero
    elevation; every double-bounce path folds through the fold axis, so
    all retro path lengths equal twice the slant range.
    """
    a = width * math.sqrt(0.5)
    h = height / 2.0
    tris = []
    tris += _quad([0, 0, -h], [a, a, -h], [a, a, h], [0, 0, h])
    tris += _quad([0, 0, -h], [0, 0, h], [a, -a, h], [a, -a, -h])
    return _soup(tris)


def corner_dihedral(width: float = 1.0, depth: float = 1.0,
                    height: float = 1.0) -> TriangleMesh:
    """Wall-and-floor corner opening toward +x; fold along y at the origin.

    Unlike the vertical-fold dihedral this one compensates elevation, so
    it stays retro-reflective near azimuth 0 at any elevation angle.
    """
    w = width / 2.0
    tris = []
    tris += _quad([0, -w, 0], [depth, -w, 0], [depth, w, 0], [0, w, 0])
    tris += _quad([0, -w, 0], [0, w, 0], [0, w, height], [0, -w, height])
    return _soup(tris)


_TRIHEDRAL_AXIS_EL_DEG = math.degrees(math.atan(1.0 / math.sqrt(2.0)))


def trihedral(size: float = 1.0, azimuth_deg: float = 45.0,
              elevation_deg: float = _TRIHEDRAL_AXIS_EL_DEG) -> TriangleMesh:
    """Corner reflector of three square plates, opening axis aimed at the
    given azimuth and elevation. Default aim is the canonical (1,1,1)."""
    s = size
    tris = []
    tris += _quad([0, 0, 0], [s, 0, 0], [s, s, 0], [0, s, 0])      # floor
    tris += _quad([0, 0, 0], [0, s, 0], [0, s, s], [0, 0, s])      # wall x=0
    tris += _quad([0, 0, 0], [0, 0, s], [s, 0, s], [s, 0, 0])      # wall y=0
    pts = np.asarray(tris, dtype=np.float64)

    # canonical opening axis is (1,1,1); tilt in the axis' vertical plane
    # then swing to the requested azimuth
    tilt = math.radians(elevation_deg - _TRIHEDRAL_AXIS_EL_DEG)
    swing = math.radians(azimuth_deg - 45.0)
    axis_az = math.radians(45.0)
    u = np.array([-math.sin(axis_az), math.cos(axis_az), 0.0])  # horizontal, perp to axis
    rot_tilt = _axis_rotation(u, -tilt)
    rot_swing = _axis_rotation(np.array([0.0, 0.0, 1.0]), swing)
    flat = pts.reshape(-1, 3) @ rot_tilt.T @ rot_swing.T
    return _soup(flat.reshape(pts.shape))


def _axis_rotation(axis: np.ndarray, angle_rad: float) -> np.ndarray:
    """Rodrigues rotation matrix about a unit axis."""
    x, y, z = axis
    c, s = math.cos(angle_rad), math.sin(angle_rad)
    cc = 1.0 - c
    return np.array([
        [c + x * x * cc, x * y * cc - z * s, x * z * cc + y * s],
        [y * x * cc + z * s, c + y * y * cc, y * z * cc - x * s],
        [z * x * cc - y * s, z * y * cc + x * s, c + z * z * cc],
    ])


def box_mesh(size_x: float = 1.0, size_y: float = 1.0,
             size_z: float = 1.0) -> TriangleMesh:
    """Closed axis-aligned box centered at the origin."""
    x, y, z = size_x / 2.0, size_y / 2.0, size_z / 2.0
    tris = []
    tris += _quad([x, -y, -z], [x, y, -z], [x, y, z], [x, -y, z])
    tris += _quad([-x, y, -z], [-x, -y, -z], [-x, -y, z], [-x, y, z])
    tris += _quad([-x, y, -z], [-x, y, z], [x, y, z], [x, y, -z])
    tris += _quad([x, -y, -z], [x, -y, z], [-x, -y, z], [-x, -y, -z])
    tris += _quad([-x, -y, z], [x, -y, z], [x, y, z], [-x, y, z])
    tris += _quad([-x, -y, -z], [-x, y, -z], [x, y, -z], [x, -y, -z])
    return _soup(tris)


def _ring(cx: float, cy: float, r: float, z: float, segments: int) -> np.ndarray:
    ang = 2.0 * np.pi * np.arange(segments) / segments
    return np.stack([cx + r * np.cos(ang), cy + r * np.sin(ang),
                     np.full(segments, float(z))], axis=1)


def _tube(ring_lo: np.ndarray, ring_hi: np.ndarray) -> list:
    tris = []
    n = len(ring_lo)
    for i in range(n):
        j = (i + 1) % n
        tris += _quad(ring_lo[i], ring_lo[j], ring_hi[j], ring_hi[i])
    return tris


def _fan(ring: np.ndarray, apex) -> list:
    n = len(ring)
    return [[ring[i], ring[(i + 1) % n], apex] for i in range(n)]


def cylinder_mesh(radius: float = 0.5, height: float = 1.0,
                  segments: int = 64, cap_top: bool = True,
                  cap_bottom: bool = False) -> TriangleMesh:
    """Vertical cylinder with its base at z=0."""
    lo = _ring(0.0, 0.0, radius, 0.0, segments)
    hi = _ring(0.0, 0.0, radius, height, segments)
    tris = _tube(lo, hi)
    if cap_top:
        tris += _fan(hi, [0.0, 0.0, height])
    if cap_bottom:
        tris += _fan(lo[::-1], [0.0, 0.0, 0.0])
    return _soup(tris)


def random_soup(count: int = 64, seed: int = 0, extent: float = 2.0,
                tri_size: float = 0.4) -> TriangleMesh:
    """Unstructured cloud of random triangles; exercise mesh for ray tests."""
    rng = np.random.Generator(np.random.Philox(key=np.uint64(seed)))
    base = rng.uniform(-extent / 2.0, extent / 2.0, size=(count, 1, 3))
    wings = rng.normal(0.0, tri_size, size=(count, 2, 3))
    tris = np.concatenate([base, base + wings], axis=1)
    return mesh_from_soup(tris, None, center=False)


# -- calibration target ----------------------------------------------------

def slicy() -> TriangleMesh:
    """Calibration target with every canonical scattering response.

    A 2.445 x 2.75 m open-top box base carries a subdivided top plate
    (flat-plate response), four wall-and-floor corners facing the cardinal
    azimuths (double bounce at any elevation), two tilted corner
    reflectors (triple bounce), a tall capped cylinder, a hollow cylinder
    (cavity), and a short capped cylinder; parts shadow one another at
    most aspects. The build lands on exactly 6400 faces.
    """
    wide, long_ = SLICY_FOOTPRINT_M
    hy, hx = wide / 2.0, long_ / 2.0
    z0 = SLICY_BOX_HEIGHT_M
    tris = []

    # open-top base box: 4 sides + bottom (the top is the grid below)
    tris += _quad([hx, -hy, 0], [hx, hy, 0], [hx, hy, z0], [hx, -hy, z0])
    tris += _quad([-hx, hy, 0], [-hx, -hy, 0], [-hx, -hy, z0], [-hx, hy, z0])
    tris += _quad([-hx, hy, 0], [-hx, hy, z0], [hx, hy, z0], [hx, hy, 0])
    tris += _quad([hx, -hy, 0], [hx, -hy, z0], [-hx, -hy, z0], [-hx, -hy, 0])
    tris += _quad([-hx, -hy, 0], [-hx, hy, 0], [hx, hy, 0], [hx, -hy, 0])

    # top plate as a 50 x 45 quad grid
    xs = np.linspace(-hx, hx, 51)
    ys = np.linspace(-hy, hy, 46)
    for i in range(50):
        for j in range(45):
            tris += _quad([xs[i], ys[j], z0], [xs[i + 1], ys[j], z0],
                          [xs[i + 1], ys[j + 1], z0], [xs[i], ys[j + 1], z0])

    # four wall-and-floor corners in a pinwheel around the center
    shelf = z0 + 0.001  # just above the top plate to avoid coplanar faces
    for ux, uy in [(1, 0), (0, 1), (-1, 0), (0, -1)]:
        # local frame: f = facing direction, s = sideways
        f = np.array([ux, uy, 0.0])
        s = np.array([-uy, ux, 0.0])
        off = f * 0.3 - s * 0.45  # wall base center, shifted off the middle
        wall_lo = [off + s * w + [0, 0, shelf] for w in (-0.25, 0.25)]
        wall_hi = [p + np.array([0, 0, 0.45]) for p in wall_lo]
        floor_far = [p + f * 0.45 for p in wall_lo]
        tris += _quad(wall_lo[0], wall_lo[1], floor_far[1], floor_far[0])
        tris += _quad(wall_lo[0], wall_hi[0], wall_hi[1], wall_lo[1])
        tris.append([wall_lo[0], floor_far[0], wall_hi[0]])
        tris.append([wall_lo[1], wall_hi[1], floor_far[1]])

    # two corner reflectors tilted toward the survey elevations
    for aim_az, cx, cy in ((45.0, 0.55, -0.85), (225.0, -0.9, -0.05)):
        tri_mesh = trihedral(0.35, azimuth_deg=aim_az, elevation_deg=20.0)
        pts = tri_mesh.vertices[tri_mesh.triangles] + [cx, cy, shelf]
        tris += list(pts)

    # tall capped cylinder, hollow cavity cylinder, short capped cylinder
    tall_lo = _ring(-0.85, 0.75, 0.38, z0, 256)
    tall_hi = _ring(-0.85, 0.75, 0.38, z0 + SLICY_CYLINDER_HEIGHT_M, 256)
    tris += _tube(tall_lo, tall_hi)
    tris += _fan(tall_hi, [-0.85, 0.75, z0 + SLICY_CYLINDER_HEIGHT_M])

    out_lo = _ring(0.85, 0.75, 0.33, z0, 128)
    out_hi = _ring(0.85, 0.75, 0.33, z0 + 0.5, 128)
    in_lo = _ring(0.85, 0.75, 0.24, z0, 128)
    in_hi = _ring(0.85, 0.75, 0.24, z0 + 0.5, 128)
    tris += _tube(out_lo, out_hi)
    tris += _tube(in_hi, in_lo)  # inner wall wound inward
    tris += _tube(out_hi, in_hi)  # top rim annulus

    small_lo = _ring(0.9, -0.8, 0.25, z0, 106)
    small_hi = _ring(0.9, -0.8, 0.25, z0 + 0.45, 106)
    tris += _tube(small_lo, small_hi)
    tris += _fan(small_hi, [0.9, -0.8, z0 + 0.45])

    flat = [np.asarray(t, dtype=np.float64) for t in tris]
    return _soup(np.stack(flat), center=True)


# -- fighter targets -------------------------------------------------------

FIGHTER_NAMES = ("F15", "F16", "J11", "J15", "MIG29", "MIG35", "EF2000")

# planform data per class: overall length/span plus wing, tail, fin,
# canard and engine layout. Dimensions start from published aircraft
# sizes and are scaled uniformly so no horizontal extent exceeds the
# unambiguous image window.
_FIGHTERS = {
    "F15": dict(length=19.4, span=13.05, width=2.0, height=1.7,
                wing=(6.0, 1.5, 0.40), tail=(5.6, 2.6, 0.9),
                fins=(2, 0.0, 3.1, 2.6), engines=2, canard=None),
    "F16": dict(length=15.0, span=9.45, width=1.4, height=1.5,
                wing=(5.0, 1.1, 0.44), tail=(4.2, 2.2, 0.8),
                fins=(1, 0.0, 2.9, 2.4), engines=1, canard=None),
    "J11": dict(length=21.9, span=14.7, width=2.3, height=1.9,
                wing=(6.5, 1.6, 0.36), tail=(6.4, 3.0, 1.0),
                fins=(2, 5.0, 3.2, 2.8), engines=2, canard=None),
    "J15": dict(length=22.3, span=15.0, width=2.3, height=1.9,
                wing=(6.6, 1.6, 0.38), tail=(6.4, 3.0, 1.0),
                fins=(2, 5.0, 3.2, 2.8), engines=2, canard=(3.4, 1.3, 0.8)),
    "MIG29": dict(length=17.3, span=11.4, width=2.1, height=1.6,
                  wing=(5.3, 1.3, 0.38), tail=(5.2, 2.5, 0.9),
                  fins=(2, 12.0, 2.8, 2.3), engines=2, canard=None),
    "MIG35": dict(length=17.3, span=12.0, width=2.1, height=1.6,
                  wing=(5.5, 1.4, 0.36), tail=(5.4, 2.6, 0.9),
                  fins=(2, 8.0, 3.1, 2.5), engines=2, canard=None),
    "EF2000": dict(length=15.96, span=10.95, width=1.9, height=1.6,
                   wing=(7.5, 0.8, 0.38), tail=None,
                   fins=(1, 0.0, 3.0, 2.7), engines=2, canard=(4.6, 1.6, 0.7)),
}

_MAX_EXTENT_M = 14.4


def _panel(root_le, tip_le, root_chord, tip_chord, thickness=0.09) -> list:
    """Tapered lifting surface as a thin prism. Chords run toward -x."""
    r_le = np.asarray(root_le, dtype=np.float64)
    t_le = np.asarray(tip_le, dtype=np.float64)
    r_te = r_le - [root_chord, 0.0, 0.0]
    t_te = t_le - [tip_chord, 0.0, 0.0]
    n = np.cross(t_le - r_le, r_te - r_le)
    n = n / np.linalg.norm(n) * (thickness / 2.0)
    a, b, c, d = r_le + n, t_le + n, t_te + n, r_te + n
    e, f, g, h = r_le - n, t_le - n, t_te - n, r_te - n
    tris = []
    tris += _quad(a, b, c, d)
    tris += _quad(e, h, g, f)
    tris += _quad(a, e, f, b)  # leading edge
    tris += _quad(d, c, g, h)  # trailing edge
    tris += _quad(b, f, g, c)  # tip
    tris += _quad(a, d, h, e)  # root
    return tris


def _fuselage(length, width, height) -> list:
    """Lofted octagonal body, nose at +x/2, capped both ends."""
    fracs = [0.10, 0.30, 0.55, 0.80, 1.00]
    prof = [0.50, 0.90, 1.00, 0.80, 0.45]
    ang = 2.0 * np.pi * (np.arange(8) + 0.5) / 8
    rings = []
    for fr, p in zip(fracs, prof):
        x = length / 2.0 - fr * length
        rings.append(np.stack([
            np.full(8, x),
            (width / 2.0) * p * np.cos(ang),
            (height / 2.0) * p * np.sin(ang)], axis=1))
    tris = _fan(rings[0][::-1], [length / 2.0, 0.0, 0.0])
    for lo, hi in zip(rings[:-1], rings[1:]):
        tris += _tube(lo, hi)
    tris += _fan(rings[-1], [-length / 2.0, 0.0, 0.0])
    return tris


def fighter(name: str) -> TriangleMesh:
    """Parametric aircraft mesh for one of the seven target classes."""
    if name not in _FIGHTERS:
        raise KeyError(f"unknown fighter {name!r}; choose from {FIGHTER_NAMES}")
    p = _FIGHTERS[name]
    scale = min(1.0, _MAX_EXTENT_M / max(p["length"], p["span"]))
    L, S = p["length"], p["span"]
    W, H = p["width"], p["height"]
    tris = []
    tris += _fuselage(L, W, H)

    # main wings
    cr, ct, le_frac = p["wing"]
    x_root = L / 2.0 - le_frac * L
    half = S / 2.0
    sweep = 0.55 * cr  # leading edge falls back toward the tip
    for side in (1.0, -1.0):
        tris += _panel([x_root, side * W * 0.45, 0.0],
                       [x_root - sweep, side * half, 0.0], cr, ct)

    # tailplanes (absent on the delta-winged class)
    if p["tail"] is not None:
        ts, tcr, tct = p["tail"]
        x_tail = -L / 2.0 + tcr * 1.15
        for side in (1.0, -1.0):
            tris += _panel([x_tail, side * W * 0.4, 0.05],
                           [x_tail - 0.5 * tcr, side * ts / 2.0, 0.05], tcr, tct)

    # canards ahead of the wing
    if p["canard"] is not None:
        cs, ccr, cct = p["canard"]
        x_can = x_root + ccr * 1.3
        for side in (1.0, -1.0):
            tris += _panel([x_can, side * W * 0.45, 0.12],
                           [x_can - 0.4 * ccr, side * cs / 2.0, 0.12], ccr, cct)

    # vertical tails, canted outward by the listed angle
    n_fins, cant_deg, fh, fcr = p["fins"]
    x_fin = -L / 2.0 + fcr * 1.25
    cant = math.radians(cant_deg)
    if n_fins == 1:
        tris += _panel([x_fin, 0.0, H * 0.45],
                       [x_fin - 0.8 * fcr, 0.0, H * 0.45 + fh], fcr, 0.45 * fcr)
    else:
        for side in (1.0, -1.0):
            y0 = side * W * 0.42
            tris += _panel([x_fin, y0, H * 0.4],
                           [x_fin - 0.8 * fcr, y0 + side * fh * math.sin(cant),
                            H * 0.4 + fh * math.cos(cant)], fcr, 0.45 * fcr)

    # engine pods under the aft body
    for k in range(p["engines"]):
        if p["engines"] == 1:
            y = 0.0
        else:
            y = (k - 0.5) * W * 0.8
        pod = box_mesh(0.32 * L, 0.28 * W, 0.3 * H)
        pts = pod.vertices[pod.triangles] + [-L / 2.0 + 0.2 * L, y, -H * 0.45]
        tris += list(pts)

    # canopy bump
    canopy = box_mesh(0.14 * L, 0.3 * W, 0.3 * H)
    tris += list(canopy.vertices[canopy.triangles] + [L * 0.22, 0.0, H * 0.55])

    flat = np.stack([np.asarray(t, dtype=np.float64) for t in tris]) * scale
    return _soup(flat, center=True)


def model_catalog() -> dict:
    """Name -> builder map for every mesh this module can emit."""
    catalog = {
        "slicy": slicy,
        "plate": flat_plate,
        "dihedral": dihedral,
        "corner-dihedral": corner_dihedral,
        "trihedral": trihedral,
        "box": box_mesh,
        "cylinder": cylinder_mesh,
    }
    for name in FIGHTER_NAMES:
        catalog[name] = (lambda n: lambda: fighter(n))(name)
    return catalog


def make_model(name: str) -> TriangleMesh:
    catalog = model_catalog()
    if name not in catalog:
        raise KeyError(f"unknown model {name!r}; choose from {sorted(catalog)}")
    return catalog[name]()

