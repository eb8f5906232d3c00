"""Built-in test geometries."""
import numpy as np

from .mesh_io import build_complex


def cube_arrays(lo=0.0, hi=1.0):
    v = np.array(
        [[x, y, z] for z in (lo, hi) for y in (lo, hi) for x in (lo, hi)], dtype=float
    )
    quads = [
        [0, 2, 3, 1],
        [4, 5, 7, 6],
        [0, 1, 5, 4],
        [2, 6, 7, 3],
        [1, 3, 7, 5],
        [0, 4, 6, 2],
    ]
    tris = []
    for a, b, c, d in quads:
        tris += [[a, b, c], [a, c, d]]
    return v, np.array(tris)


def cube(lo=0.0, hi=1.0):
    v, t = cube_arrays(lo, hi)
    return build_complex(v, t, require_watertight=True)


def icosahedron_arrays():
    phi = (1 + 5**0.5) / 2
    v = np.array(
        [
            [-1, phi, 0], [1, phi, 0], [-1, -phi, 0], [1, -phi, 0],
            [0, -1, phi], [0, 1, phi], [0, -1, -phi], [0, 1, -phi],
            [phi, 0, -1], [phi, 0, 1], [-phi, 0, -1], [-phi, 0, 1],
        ],
        dtype=float,
    )
    v /= np.linalg.norm(v, axis=1)[:, None]
    t = np.array(
        [
            [0, 11, 5], [0, 5, 1], [0, 1, 7], [0, 7, 10], [0, 10, 11],
            [1, 5, 9], [5, 11, 4], [11, 10, 2], [10, 7, 6], [7, 1, 8],
            [3, 9, 4], [3, 4, 2], [3, 2, 6], [3, 6, 8], [3, 8, 9],
            [4, 9, 5], [2, 4, 11], [6, 2, 10], [8, 6, 7], [9, 8, 1],
        ]
    )
    return v, t


def icosphere_arrays(subdivisions=3, radius=1.0):
    v, t = icosahedron_arrays()
    verts = list(v)
    for _ in range(subdivisions):
        cache = {}

        def mid(a, b):
            key = (min(a, b), max(a, b))
            if key not in cache:
                p = verts[a] + verts[b]
                verts.append(p / np.linalg.norm(p))
                cache[key] = len(verts) - 1
            return cache[key]

        new = []
        for a, b, c in t:
            ab, bc, ca = mid(a, b), mid(b, c), mid(c, a)
            new += [[a, ab, ca], [b, bc, ab], [c, ca, bc], [ab, bc, ca]]
        t = np.array(new)
    return radius * np.array(verts), t


def icosphere(subdivisions=3, radius=1.0):
    v, t = icosphere_arrays(subdivisions, radius)
    return build_complex(v, t, require_watertight=True)


def torus(major=1.0, minor=0.4, n_major=48, n_minor=24):
    u = 2 * np.pi * np.arange(n_major) / n_major
    w = 2 * np.pi * np.arange(n_minor) / n_minor
    uu, ww = np.meshgrid(u, w, indexing="ij")
    v = np.stack(
        [
            (major + minor * np.cos(ww)) * np.cos(uu),
            (major + minor * np.cos(ww)) * np.sin(uu),
            minor * np.sin(ww),
        ],
        axis=-1,
    ).reshape(-1, 3)
    idx = lambda i, j: (i % n_major) * n_minor + (j % n_minor)  # noqa: E731
    tris = []
    for i in range(n_major):
        for j in range(n_minor):
            a, b, c, d = idx(i, j), idx(i + 1, j), idx(i + 1, j + 1), idx(i, j + 1)
            tris += [[a, b, c], [a, c, d]]
    return build_complex(v, np.array(tris), require_watertight=True)


def three_fins():
    """Three rectangles sharing the edge x=y=0, z in [0, 1] (non-manifold)."""
    v = [[0, 0, 0], [0, 0, 1]]
    tris = []
    for ang in (0.0, 2 * np.pi / 3, 4 * np.pi / 3):
        d = [np.cos(ang), np.sin(ang), 0.0]
        base = len(v)
        v += [[d[0], d[1], 0.0], [d[0], d[1], 1.0]]
        tris += [[0, base, base + 1], [0, base + 1, 1]]
    return build_complex(np.array(v, float), np.array(tris))


def square_with_hole(outer=1.0, inner=0.4):
    """PSLG of a square with a concentric square hole (counter-clockwise outer loop)."""
    o, i = outer / 2, inner / 2
    pts = np.array(
        [[-o, -o], [o, -o], [o, o], [-o, o], [-i, -i], [-i, i], [i, i], [i, -i]], dtype=float
    )
    segs = np.array([[0, 1], [1, 2], [2, 3], [3, 0], [4, 5], [5, 6], [6, 7], [7, 4]])
    return pts, segs
