"""Pure-numpy raycast kernel, interchangeable with the compiled one."""
from __future__ import annotations

import numpy as np


def cast_rays(
    ox: float,
    oy: float,
    heading: float,
    n_beams: int,
    max_range: float,
    segments: np.ndarray,
    circles: np.ndarray,
) -> np.ndarray:
    ang = heading + 2.0 * np.pi * np.arange(n_beams) / n_beams
    dx = np.cos(ang)[:, None]
    dy = np.sin(ang)[:, None]
    best = np.full(n_beams, float(max_range))

    if len(segments):
        x1, y1, x2, y2 = (segments[:, j][None, :] for j in range(4))
        ex, ey = x2 - x1, y2 - y1
        wx, wy = x1 - ox, y1 - oy
        denom = dx * ey - dy * ex
        with np.errstate(divide="ignore", invalid="ignore"):
            t = (wx * ey - wy * ex) / denom
            u = (wx * dy - wy * dx) / denom
        hit = (denom != 0.0) & (t >= 0.0) & (u >= 0.0) & (u <= 1.0)
        t = np.where(hit, t, np.inf)
        best = np.minimum(best, t.min(axis=1))

    if len(circles):
        fx = ox - circles[:, 0][None, :]
        fy = oy - circles[:, 1][None, :]
        c = fx * fx + fy * fy - circles[:, 2][None, :] ** 2
        b = fx * dx + fy * dy
        disc = b * b - c
        with np.errstate(invalid="ignore"):
            t = -b - np.sqrt(disc)
        hit = (disc >= 0.0) & (t >= 0.0)
        t = np.where(hit, t, np.inf)
        best = np.minimum(best, t.min(axis=1))
        if (c < 0.0).any():
            best[:] = 0.0
    return best
