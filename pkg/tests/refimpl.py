"""Independent brute-force reference implementations used as test oracles.

Everything here is written from the definitions, with plain loops, and
deliberately shares no code with the library internals.
"""

import math

import numpy as np

SOBEL_X = np.array([[-1.0, 0.0, 1.0], [-2.0, 0.0, 2.0], [-1.0, 0.0, 1.0]]) / 8.0
SOBEL_Y = SOBEL_X.T


def conv3_replicate(f, kernel):
    """3x3 correlation with clamped (replicate) borders, by explicit loops."""
    h, w = f.shape
    out = np.zeros_like(f)
    for i in range(h):
        for j in range(w):
            acc = 0.0
            for di in (-1, 0, 1):
                for dj in (-1, 0, 1):
                    ii = min(max(i + di, 0), h - 1)
                    jj = min(max(j + dj, 0), w - 1)
                    acc += kernel[di + 1, dj + 1] * f[ii, jj]
            out[i, j] = acc
    return out


def brute_signed_distance(mask):
    """Signed distance by exhaustive search over all boundary midpoints."""
    m = np.asarray(mask)
    h, w = m.shape
    points = []
    for i in range(h):
        for j in range(w):
            if j + 1 < w and m[i, j] != m[i, j + 1]:
                points.append((float(i), j + 0.5))
            if i + 1 < h and m[i, j] != m[i + 1, j]:
                points.append((i + 0.5, float(j)))
    out = np.zeros((h, w))
    if not points:
        sentinel = math.hypot(h, w)
        out[:] = sentinel if m.flat[0] else -sentinel
        return out
    for i in range(h):
        for j in range(w):
            best = min(math.hypot(i - py, j - px) for py, px in points)
            out[i, j] = best if m[i, j] else -best
    return out


def brute_boundary_pixels(mask):
    """Mask pixels with an in-grid 4-neighbor of opposite value."""
    m = np.asarray(mask)
    h, w = m.shape
    pixels = []
    for i in range(h):
        for j in range(w):
            if not m[i, j]:
                continue
            for di, dj in ((1, 0), (-1, 0), (0, 1), (0, -1)):
                ii, jj = i + di, j + dj
                if 0 <= ii < h and 0 <= jj < w and m[ii, jj] != m[i, j]:
                    pixels.append((i, j))
                    break
    return pixels


def brute_boundary_f1(pred, gt, tol):
    """Boundary F-measure by exhaustive nearest-pixel matching."""
    pb = brute_boundary_pixels(pred)
    gb = brute_boundary_pixels(gt)
    if not pb and not gb:
        return 1.0
    if not pb or not gb:
        return 0.0

    def matched(points, targets):
        hits = 0
        for (i, j) in points:
            dmin = min(math.hypot(i - ti, j - tj) for ti, tj in targets)
            if dmin <= tol + 1e-9:
                hits += 1
        return hits / len(points)

    precision = matched(pb, gb)
    recall = matched(gb, pb)
    if precision + recall == 0:
        return 0.0
    return 2 * precision * recall / (precision + recall)


def soft_step(z, eps):
    return 0.5 * (1.0 + (2.0 / math.pi) * math.atan(z / eps))


def soft_impulse(z, eps):
    return (1.0 / math.pi) * eps * eps / (eps * eps + z * z)
