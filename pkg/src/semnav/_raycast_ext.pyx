"""Compiled raycast kernel: 2D beams against line segments and circles."""
import numpy as np

from libc.math cimport cos, sin, sqrt, M_PI


def cast_rays(double ox, double oy, double heading, int n_beams, double max_range,
              const double[:, ::1] segments, const double[:, ::1] circles):
    """Distance from (ox, oy) to the first hit along each beam, capped at max_range.

    Beam k points at ``heading + 2*pi*k/n_beams``. ``segments`` rows are
    (x1, y1, x2, y2); ``circles`` rows are (cx, cy, radius). A beam whose
    origin lies inside a circle reports 0.
    """
    out = np.empty(n_beams, dtype=np.float64)
    cdef double[::1] ranges = out
    cdef Py_ssize_t n_seg = segments.shape[0]
    cdef Py_ssize_t n_circ = circles.shape[0]
    cdef Py_ssize_t k, i
    cdef double ang, dx, dy, best, ex, ey, wx, wy, denom, t, u
    cdef double fx, fy, b, c, disc

    for k in range(n_beams):
        ang = heading + 2.0 * M_PI * k / n_beams
        dx = cos(ang)
        dy = sin(ang)
        best = max_range
        for i in range(n_seg):
            ex = segments[i, 2] - segments[i, 0]
            ey = segments[i, 3] - segments[i, 1]
            denom = dx * ey - dy * ex
            if denom == 0.0:
                continue
            wx = segments[i, 0] - ox
            wy = segments[i, 1] - oy
            t = (wx * ey - wy * ex) / denom
            u = (wx * dy - wy * dx) / denom
            if t >= 0.0 and u >= 0.0 and u <= 1.0 and t < best:
                best = t
        for i in range(n_circ):
            fx = ox - circles[i, 0]
            fy = oy - circles[i, 1]
            c = fx * fx + fy * fy - circles[i, 2] * circles[i, 2]
            if c < 0.0:
                best = 0.0
                break
            b = fx * dx + fy * dy
            disc = b * b - c
            if disc < 0.0:
                continue
            t = -b - sqrt(disc)
            if t >= 0.0 and t < best:
                best = t
        ranges[k] = best
    return out
