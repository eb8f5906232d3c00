"""Relaxed co-smoothness test between boundary points.

Every point carries a stratum id, the stratum dimension (0 corner, 1 crease,
2 patch) and its orientation vector: the crease direction or the patch
normal (zero for corners).

The test is directional. ``s`` is the reference point (the closest point on
the reference face), ``p`` the point being tested:

* same stratum: (1) the orientation vectors deviate by at most theta and
  (2) the displacement ``p - s`` stays near the reference face: within theta
  of the crease line, or within theta of the patch tangent plane;
* ``p`` on a lower-dimensional stratum in the closure of ``s``'s stratum:
  test (2) only;
* anything else, including two different corners, is not co-smooth.

Test (2) is waived for coincident points.
"""
import numpy as np


def cosmooth(theta, incident, s_sid, s_dim, s_vec, s_pos, p_sid, p_dim, p_vec, p_pos, tol=0.0):
    """Vectorized relaxed test; all per-point arguments broadcast together."""
    s_sid = np.asarray(s_sid)
    p_sid = np.asarray(p_sid)
    s_dim = np.asarray(s_dim)
    p_dim = np.asarray(p_dim)
    s_vec = np.asarray(s_vec, dtype=float)
    p_vec = np.asarray(p_vec, dtype=float)
    d = np.asarray(p_pos, dtype=float) - np.asarray(s_pos, dtype=float)
    dn = np.sqrt(np.einsum("...i,...i->...", d, d))
    same = s_sid == p_sid
    cos_t = np.cos(theta)
    t1 = np.einsum("...i,...i->...", s_vec, p_vec) >= cos_t - 1e-12
    with np.errstate(invalid="ignore", divide="ignore"):
        c = np.abs(np.einsum("...i,...i->...", s_vec, d)) / dn
    t2 = np.where(s_dim == 1, c >= cos_t - 1e-12, c <= np.sin(theta) + 1e-12)
    t2 = t2 | (dn <= tol)
    lower = (p_dim < s_dim) & incident[p_sid, s_sid]
    out = (same & t1 & t2) | (lower & t2)
    return np.where(s_dim == 0, same, out)


def cosmooth_symmetric(theta, incident, a, b, tol=0.0):
    """Either direction passes; ``a`` and ``b`` are (sid, dim, vec, pos) tuples."""
    return cosmooth(theta, incident, *a, *b, tol=tol) | cosmooth(theta, incident, *b, *a, tol=tol)


def cosmooth_test(sigma, sigma_vec, tau_vec, p, theta, crease):
    """Relaxed test for subfaces ``sigma`` and ``tau`` of one stratum, ``p`` on ``tau``.

    ``sigma`` is a ``(2, 3)`` segment on a crease or a ``(3, 3)`` triangle on a
    patch. The closest point of ``sigma`` to ``p`` anchors the displacement.
    """
    from .geometry import closest_points_segments, closest_points_triangles

    sigma = np.asarray(sigma, dtype=float)
    p = np.asarray(p, dtype=float)
    if len(sigma) == 2:
        q = closest_points_segments(p[None], sigma[0][None], sigma[1][None])[0]
    else:
        q = closest_points_triangles(p[None], sigma[0], sigma[1], sigma[2])[0]
    dim = 1 if crease else 2
    inc = np.zeros((1, 1), dtype=bool)
    return bool(cosmooth(theta, inc, 0, dim, sigma_vec, q, 0, dim, tau_vec, p, 1e-12 * max(1.0, np.abs(sigma).max())))
